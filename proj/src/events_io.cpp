#include "accdoa/events_io.hpp"

#include "accdoa/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace accdoa {

std::vector<LabelRow> track_to_rows(const EventLabelTrack& labels) {
    std::vector<LabelRow> rows;
    for (int t = 0; t < labels.frames; ++t) {
        for (int c = 0; c < labels.classes; ++c) {
            if (!labels.active(c, t)) continue;
            const auto [az, el] = cart_to_sph(labels.direction(c, t));
            rows.push_back({t, c, az, el});
        }
    }
    return rows;
}

void write_label_csv(std::ostream& os, const std::vector<LabelRow>& rows) {
    os << kLabelCsvHeader << '\n';
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f\n", r.frame, r.class_idx, r.azimuth_deg, r.elevation_deg);
        os << buf;
    }
}

void write_label_csv(const std::filesystem::path& path, const std::vector<LabelRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_label_csv(os, rows);
    if (!os) throw IoError("write failed: " + path.string());
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_field(const std::string& s, std::size_t line, const char* what) {
    std::istringstream in(s);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof())
        throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
    return v;
}

} // namespace

std::vector<LabelRow> read_label_csv(std::istream& is) {
    std::vector<LabelRow> rows;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::string text = trim(raw);
        if (text.empty()) continue;
        if (line == 1 && text == kLabelCsvHeader) continue;

        std::vector<std::string> fields;
        std::stringstream ss(text);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(trim(f));
        if (!text.empty() && text.back() == ',') fields.emplace_back();
        if (fields.size() != 4)
            throw ParseError("expected 4 fields, found " + std::to_string(fields.size()), line);

        LabelRow r;
        r.frame = parse_field<int>(fields[0], line, "frame");
        r.class_idx = parse_field<int>(fields[1], line, "class index");
        r.azimuth_deg = parse_field<double>(fields[2], line, "azimuth");
        r.elevation_deg = parse_field<double>(fields[3], line, "elevation");
        if (r.frame < 0) throw ParseError("negative frame index", line);
        if (r.class_idx < 0) throw ParseError("negative class index", line);
        if (!(r.azimuth_deg >= -180.0 && r.azimuth_deg <= 180.0)) throw ParseError("azimuth out of range", line);
        if (!(r.elevation_deg >= -90.0 && r.elevation_deg <= 90.0)) throw ParseError("elevation out of range", line);
        rows.push_back(r);
    }
    return rows;
}

std::vector<LabelRow> read_label_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return read_label_csv(is);
}

std::vector<DetectedEvent> grid_to_events(const AccdoaGrid& grid, double threshold) {
    const EventLabelTrack labels = decode(grid, threshold);
    std::vector<DetectedEvent> events;
    for (int c = 0; c < labels.classes; ++c) {
        int t = 0;
        while (t < labels.frames) {
            if (!labels.active(c, t)) {
                ++t;
                continue;
            }
            DetectedEvent e;
            e.class_idx = c;
            e.onset = t;
            while (t < labels.frames && labels.active(c, t)) {
                e.doas.push_back(labels.direction(c, t));
                ++t;
            }
            e.offset = t - 1;
            events.push_back(std::move(e));
        }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const DetectedEvent& a, const DetectedEvent& b) { return a.onset < b.onset; });
    return events;
}

std::vector<LabelRow> events_to_rows(const std::vector<DetectedEvent>& events) {
    std::vector<LabelRow> rows;
    for (const auto& e : events) {
        for (int t = e.onset; t <= e.offset; ++t) {
            const auto [az, el] = cart_to_sph(e.doas[static_cast<std::size_t>(t - e.onset)]);
            rows.push_back({t, e.class_idx, az, el});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const LabelRow& a, const LabelRow& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.class_idx < b.class_idx;
    });
    return rows;
}

} // namespace accdoa
