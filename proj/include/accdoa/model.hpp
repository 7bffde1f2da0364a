#pragma once

#include "accdoa/codec.hpp"
#include "accdoa/features.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace accdoa {

struct ConvBlockConfig {
    int channels = 16;
    int kernel = 3;
    int pool_freq = 4;
    int pool_time = 2;
};

/// How phase planes reach the first conv block. `angle` feeds the wrapped
/// IPD as is; `cos_sin` replaces each IPD plane by its cosine and sine,
/// which removes the jump at +-pi.
enum class PhaseEncoding { angle, cos_sin };

/// Embedding trunk (conv blocks + one GRU layer) and output head.
struct ModelConfig {
    std::vector<ConvBlockConfig> blocks{{16, 3, 4, 2}, {32, 3, 4, 2}, {64, 3, 4, 2}};
    int hidden = 64; // K, embedding dimension
    HeadVariant head = HeadVariant::accdoa;
    int classes = 3;
    int input_channels = kFeatureChannels;
    int input_bins = kFrequencyBins;
    int input_frames = 128;
    /// Fixed gains applied to the input before the first block: planes below
    /// kAmplitudePlanes are multiplied by amplitude_scale, the rest by
    /// phase_scale. Not trained.
    double amplitude_scale = 1.0;
    double phase_scale = 1.0;
    PhaseEncoding phase_encoding = PhaseEncoding::cos_sin;

    /// Planes seen by the first block after phase encoding.
    int network_input_channels() const;
    int temporal_pool() const;
    int output_frames() const;
    /// Frequency bins left after the last block.
    int trunk_bins() const;
    /// Size of the per-frame vector fed to the GRU.
    int sequence_dim() const;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct ParamSpec {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;

    Eigen::Index size() const { return rows * cols; }
};

/// Named views into the flat parameter vector.
class ParameterLayout {
public:
    explicit ParameterLayout(const ModelConfig& config);

    const std::vector<ParamSpec>& entries() const { return entries_; }
    const ParamSpec& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    Eigen::Index total() const { return total_; }
    /// Offset where the head begins; everything before it is the trunk.
    Eigen::Index head_offset() const { return head_offset_; }

private:
    void add(std::string name, Eigen::Index rows, Eigen::Index cols);

    std::vector<ParamSpec> entries_;
    Eigen::Index total_ = 0;
    Eigen::Index head_offset_ = 0;
};

template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowMatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flat parameter vector. Every mutable access bumps a version counter so a
/// forward cache can detect that its parameters changed underneath it.
template <class S>
class Parameters {
public:
    Parameters() = default;
    explicit Parameters(std::shared_ptr<const ParameterLayout> layout);

    const ParameterLayout& layout() const { return *layout_; }
    std::shared_ptr<const ParameterLayout> layout_ptr() const { return layout_; }

    const VectorX<S>& values() const { return values_; }
    VectorX<S>& mutable_values() {
        ++version_;
        return values_;
    }
    std::uint64_t version() const { return version_; }
    Eigen::Index size() const { return values_.size(); }

    Eigen::Map<const MatrixX<S>> view(const ParamSpec& spec) const {
        return {values_.data() + spec.offset, spec.rows, spec.cols};
    }
    Eigen::Map<const MatrixX<S>> view(const std::string& name) const { return view(layout_->at(name)); }

    template <class T>
    Parameters<T> cast() const {
        Parameters<T> out(layout_);
        out.mutable_values() = values_.template cast<T>();
        return out;
    }

private:
    std::shared_ptr<const ParameterLayout> layout_;
    VectorX<S> values_;
    std::uint64_t version_ = 0;
};

using ModelOutput = std::variant<AccdoaGrid, TwoBranchOutput>;

struct TwoBranchGradient {
    Eigen::MatrixXd sed; // w.r.t. probabilities, C x T
    AccdoaGrid doa;
};

using OutputGradient = std::variant<AccdoaGrid, TwoBranchGradient>;

/// Intermediates kept by forward() for backward().
template <class S>
struct ForwardCache {
    struct Block {
        RowMatrixX<S> input;      // Cin x (F * T)
        RowMatrixX<S> activation; // Cout x (F * T), after ReLU, before pooling
        int bins = 0;
        int frames = 0;
        int pooled_bins = 0;
        int pooled_frames = 0;
    };
    std::vector<Block> blocks;
    MatrixX<S> sequence; // D x T
    MatrixX<S> hidden;   // K x (T + 1), column 0 is the zero initial state
    MatrixX<S> reset, update, candidate, hidden_proj; // K x T each
    MatrixX<S> sed_hidden, doa_hidden;                // two-branch only
    MatrixX<S> sed_prob;
    const void* params_identity = nullptr;
    std::uint64_t params_version = 0;
};

template <class S>
struct ForwardResult {
    ModelOutput output;
    ForwardCache<S> cache;
};

template <class S>
class Model {
public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    std::shared_ptr<const ParameterLayout> layout() const { return layout_; }

    /// Uniform fan-in/fan-out initialisation with zero biases.
    Parameters<S> init(std::uint64_t seed) const;
    Parameters<S> zeros() const;

    ForwardResult<S> forward(const Parameters<S>& params, const FeatureTensor& x) const;
    std::vector<ForwardResult<S>> forward_batch(const Parameters<S>& params,
                                                const std::vector<FeatureTensor>& batch) const;

    /// Gradient of the scalar loss w.r.t. every parameter, given the loss
    /// gradient w.r.t. the head outputs.
    VectorX<S> backward(const Parameters<S>& params, const ForwardCache<S>& cache,
                        const OutputGradient& grad) const;

    /// ACCDOA vectors for one segment; two-branch outputs are mapped through
    /// two_branch_to_accdoa.
    AccdoaGrid predict(const Parameters<S>& params, const FeatureTensor& x) const;

private:
    ModelConfig config_;
    std::shared_ptr<const ParameterLayout> layout_;
};

std::int64_t count_parameters(const ModelConfig& config);

extern template class Parameters<float>;
extern template class Parameters<double>;
extern template class Model<float>;
extern template class Model<double>;

} // namespace accdoa
