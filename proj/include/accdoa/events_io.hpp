#pragma once

#include "accdoa/codec.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace accdoa {

/// One active class in one 100 ms frame.
struct LabelRow {
    int frame = 0;
    int class_idx = 0;
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
};

inline constexpr const char* kLabelCsvHeader = "frame_100ms,class_idx,azimuth_deg,elevation_deg";

std::vector<LabelRow> track_to_rows(const EventLabelTrack& labels);

void write_label_csv(std::ostream& os, const std::vector<LabelRow>& rows);
void write_label_csv(const std::filesystem::path& path, const std::vector<LabelRow>& rows);

/// Parses the label schema. The header line is optional; blank lines are
/// skipped. Malformed rows raise ParseError with the 1-based line number.
std::vector<LabelRow> read_label_csv(std::istream& is);
std::vector<LabelRow> read_label_csv(const std::filesystem::path& path);

/// A run of consecutive active frames of one class.
struct DetectedEvent {
    int class_idx = 0;
    int onset = 0;
    int offset = 0; // inclusive
    std::vector<Doa> doas; // one per frame
};

/// Decodes each frame and merges consecutive active frames per class. No gap
/// bridging: a single inactive frame splits an event.
std::vector<DetectedEvent> grid_to_events(const AccdoaGrid& grid, double threshold = kDefaultThreshold);

std::vector<LabelRow> events_to_rows(const std::vector<DetectedEvent>& events);

} // namespace accdoa
