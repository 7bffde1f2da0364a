#include "accdoa/model.hpp"

#include "accdoa/error.hpp"
#include "accdoa/rng.hpp"

#include <algorithm>
#include <cmath>

namespace accdoa {

// ---- config ---------------------------------------------------------------

int ModelConfig::network_input_channels() const {
    const int phase = std::max(0, input_channels - kAmplitudePlanes);
    return phase_encoding == PhaseEncoding::cos_sin ? input_channels + phase : input_channels;
}

int ModelConfig::temporal_pool() const {
    int p = 1;
    for (const auto& b : blocks) p *= b.pool_time;
    return p;
}

int ModelConfig::output_frames() const {
    int t = input_frames;
    for (const auto& b : blocks) t /= b.pool_time;
    return t;
}

int ModelConfig::trunk_bins() const {
    int f = input_bins;
    for (const auto& b : blocks) f /= b.pool_freq;
    return f;
}

int ModelConfig::sequence_dim() const {
    const int ch = blocks.empty() ? network_input_channels() : blocks.back().channels;
    return ch * trunk_bins();
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("model." + field + ": " + why);
    };
    if (hidden < 1) fail("hidden", "must be positive");
    if (classes < 1) fail("classes", "must be positive");
    if (input_channels < 1) fail("input_channels", "must be positive");
    if (input_bins < 1) fail("input_bins", "must be positive");
    if (input_frames < 1) fail("input_frames", "must be positive");
    if (!(amplitude_scale > 0.0) || !std::isfinite(amplitude_scale)) fail("amplitude_scale", "must be positive");
    if (!(phase_scale > 0.0) || !std::isfinite(phase_scale)) fail("phase_scale", "must be positive");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        const std::string at = "blocks[" + std::to_string(i) + "]";
        if (b.channels < 1) fail(at + ".channels", "must be positive");
        if (b.kernel < 1 || b.kernel % 2 == 0) fail(at + ".kernel", "must be a positive odd number");
        if (b.pool_freq < 1 || b.pool_time < 1) fail(at + ".pool", "pool sizes must be positive");
    }
    if (trunk_bins() < 1) fail("blocks", "frequency pooling leaves no bins");
    if (output_frames() < 1) fail("blocks", "temporal pooling leaves no frames");
}

// ---- layout ---------------------------------------------------------------

ParameterLayout::ParameterLayout(const ModelConfig& config) {
    config.validate();
    int in_ch = config.network_input_channels();
    for (std::size_t i = 0; i < config.blocks.size(); ++i) {
        const auto& b = config.blocks[i];
        const std::string p = "conv" + std::to_string(i);
        add(p + ".weight", b.channels, static_cast<Eigen::Index>(in_ch) * b.kernel * b.kernel);
        add(p + ".bias", b.channels, 1);
        in_ch = b.channels;
    }
    const Eigen::Index k = config.hidden;
    add("gru.w_input", 3 * k, config.sequence_dim());
    add("gru.w_hidden", 3 * k, k);
    add("gru.b_input", 3 * k, 1);
    add("gru.b_hidden", 3 * k, 1);
    head_offset_ = total_;
    const Eigen::Index c = config.classes;
    if (config.head == HeadVariant::accdoa) {
        add("head.weight", 3 * c, k);
        add("head.bias", 3 * c, 1);
    } else {
        add("sed.fc1.weight", k, k);
        add("sed.fc1.bias", k, 1);
        add("sed.fc2.weight", c, k);
        add("sed.fc2.bias", c, 1);
        add("doa.fc1.weight", k, k);
        add("doa.fc1.bias", k, 1);
        add("doa.fc2.weight", 3 * c, k);
        add("doa.fc2.bias", 3 * c, 1);
    }
}

void ParameterLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    entries_.push_back({std::move(name), rows, cols, total_});
    total_ += rows * cols;
}

const ParamSpec& ParameterLayout::at(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw ConfigError("no parameter named " + name);
}

bool ParameterLayout::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

template <class S>
Parameters<S>::Parameters(std::shared_ptr<const ParameterLayout> layout)
    : layout_(std::move(layout)), values_(VectorX<S>::Zero(layout_->total())) {}

std::int64_t count_parameters(const ModelConfig& config) {
    return static_cast<std::int64_t>(ParameterLayout(config).total());
}

// ---- kernels --------------------------------------------------------------

namespace {

template <class S>
S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

template <class S>
void im2col(const RowMatrixX<S>& in, int bins, int frames, int kernel, RowMatrixX<S>& cols) {
    const int pad = kernel / 2;
    const Eigen::Index plane = static_cast<Eigen::Index>(bins) * frames;
    cols.setZero(in.rows() * kernel * kernel, plane);
    for (Eigen::Index ci = 0; ci < in.rows(); ++ci) {
        for (int df = 0; df < kernel; ++df) {
            for (int dt = 0; dt < kernel; ++dt) {
                const Eigen::Index row = (ci * kernel + df) * kernel + dt;
                const int t0 = std::max(0, pad - dt);
                const int t1 = std::min(frames, frames + pad - dt);
                if (t1 <= t0) continue;
                for (int f = 0; f < bins; ++f) {
                    const int fs = f + df - pad;
                    if (fs < 0 || fs >= bins) continue;
                    cols.row(row).segment(static_cast<Eigen::Index>(f) * frames + t0, t1 - t0) =
                        in.row(ci).segment(static_cast<Eigen::Index>(fs) * frames + t0 + dt - pad, t1 - t0);
                }
            }
        }
    }
}

template <class S>
void col2im(const RowMatrixX<S>& cols, int channels, int bins, int frames, int kernel, RowMatrixX<S>& out) {
    const int pad = kernel / 2;
    out.setZero(channels, static_cast<Eigen::Index>(bins) * frames);
    for (Eigen::Index ci = 0; ci < channels; ++ci) {
        for (int df = 0; df < kernel; ++df) {
            for (int dt = 0; dt < kernel; ++dt) {
                const Eigen::Index row = (ci * kernel + df) * kernel + dt;
                const int t0 = std::max(0, pad - dt);
                const int t1 = std::min(frames, frames + pad - dt);
                if (t1 <= t0) continue;
                for (int f = 0; f < bins; ++f) {
                    const int fs = f + df - pad;
                    if (fs < 0 || fs >= bins) continue;
                    out.row(ci).segment(static_cast<Eigen::Index>(fs) * frames + t0 + dt - pad, t1 - t0) +=
                        cols.row(row).segment(static_cast<Eigen::Index>(f) * frames + t0, t1 - t0);
                }
            }
        }
    }
}

template <class S>
RowMatrixX<S> avg_pool(const RowMatrixX<S>& in, int bins, int frames, int pf, int pt) {
    const int fo = bins / pf;
    const int to = frames / pt;
    RowMatrixX<S> out = RowMatrixX<S>::Zero(in.rows(), static_cast<Eigen::Index>(fo) * to);
    const S scale = S(1) / S(pf * pt);
    for (Eigen::Index c = 0; c < in.rows(); ++c) {
        const S* src = in.data() + c * in.cols();
        S* dst = out.data() + c * out.cols();
        for (int f = 0; f < fo; ++f) {
            S* drow = dst + static_cast<Eigen::Index>(f) * to;
            for (int k = 0; k < pf; ++k) {
                const S* srow = src + static_cast<Eigen::Index>(f * pf + k) * frames;
                for (int t = 0; t < to; ++t) {
                    S s = S(0);
                    for (int j = 0; j < pt; ++j) s += srow[t * pt + j];
                    drow[t] += s;
                }
            }
        }
    }
    out *= scale;
    return out;
}

template <class S>
RowMatrixX<S> avg_pool_backward(const RowMatrixX<S>& dout, int bins, int frames, int pf, int pt) {
    const int fo = bins / pf;
    const int to = frames / pt;
    RowMatrixX<S> din = RowMatrixX<S>::Zero(dout.rows(), static_cast<Eigen::Index>(bins) * frames);
    const S scale = S(1) / S(pf * pt);
    for (Eigen::Index c = 0; c < dout.rows(); ++c) {
        const S* src = dout.data() + c * dout.cols();
        S* dst = din.data() + c * din.cols();
        for (int f = 0; f < fo * pf; ++f) {
            const S* srow = src + static_cast<Eigen::Index>(f / pf) * to;
            S* drow = dst + static_cast<Eigen::Index>(f) * frames;
            for (int t = 0; t < to; ++t) {
                const S v = scale * srow[t];
                for (int j = 0; j < pt; ++j) drow[t * pt + j] = v;
            }
        }
    }
    return din;
}

template <class S>
Eigen::Map<MatrixX<S>> grad_view(VectorX<S>& g, const ParamSpec& spec) {
    return {g.data() + spec.offset, spec.rows, spec.cols};
}

double uniform_limit_glorot(Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

} // namespace

// ---- model ----------------------------------------------------------------

template <class S>
Model<S>::Model(ModelConfig config)
    : config_(std::move(config)), layout_(std::make_shared<const ParameterLayout>(config_)) {}

template <class S>
Parameters<S> Model<S>::zeros() const {
    return Parameters<S>(layout_);
}

template <class S>
Parameters<S> Model<S>::init(std::uint64_t seed) const {
    Parameters<S> p(layout_);
    VectorX<S>& v = p.mutable_values();
    Rng rng(seed);
    for (const auto& e : layout_->entries()) {
        double limit = 0.0;
        if (e.cols == 1) {
            limit = 0.0; // biases
        } else if (e.name.rfind("conv", 0) == 0) {
            limit = std::sqrt(6.0 / static_cast<double>(e.cols)); // He, ReLU follows
        } else if (e.name.rfind("gru.", 0) == 0) {
            limit = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
        } else {
            limit = uniform_limit_glorot(e.cols, e.rows);
        }
        for (Eigen::Index i = 0; i < e.size(); ++i) v[e.offset + i] = static_cast<S>(rng.uniform(-limit, limit));
    }
    return p;
}

template <class S>
ForwardResult<S> Model<S>::forward(const Parameters<S>& params, const FeatureTensor& x) const {
    const ModelConfig& cfg = config_;
    if (x.channels != cfg.input_channels || x.bins != cfg.input_bins || x.frames != cfg.input_frames)
        throw ConfigError("model input must be " + std::to_string(cfg.input_channels) + "x" +
                          std::to_string(cfg.input_bins) + "x" + std::to_string(cfg.input_frames) + ", got " +
                          std::to_string(x.channels) + "x" + std::to_string(x.bins) + "x" + std::to_string(x.frames));
    if (params.size() != layout_->total()) throw ConfigError("parameter vector does not match model layout");

    ForwardResult<S> result;
    ForwardCache<S>& cache = result.cache;
    cache.params_identity = &params;
    cache.params_version = params.version();

    const Eigen::Map<const RowMatrixX<double>> raw(x.data.data(), x.channels,
                                                   static_cast<Eigen::Index>(x.bins) * x.frames);
    RowMatrixX<S> h(cfg.network_input_channels(), raw.cols());
    const int amp = std::min(x.channels, kAmplitudePlanes);
    const int phase = x.channels - amp;
    h.topRows(amp) = (cfg.amplitude_scale * raw.topRows(amp)).template cast<S>();
    if (cfg.phase_encoding == PhaseEncoding::angle) {
        h.bottomRows(phase) = (cfg.phase_scale * raw.bottomRows(phase)).template cast<S>();
    } else {
        h.middleRows(amp, phase) = (cfg.phase_scale * raw.bottomRows(phase).array().cos()).matrix().template cast<S>();
        h.bottomRows(phase) = (cfg.phase_scale * raw.bottomRows(phase).array().sin()).matrix().template cast<S>();
    }
    int bins = x.bins;
    int frames = x.frames;
    RowMatrixX<S> cols;

    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        const auto& b = cfg.blocks[i];
        const std::string p = "conv" + std::to_string(i);
        const auto w = params.view(p + ".weight");
        const auto bias = params.view(p + ".bias");

        typename ForwardCache<S>::Block blk;
        blk.bins = bins;
        blk.frames = frames;
        im2col(h, bins, frames, b.kernel, cols);
        RowMatrixX<S> pre = w * cols;
        pre.colwise() += bias.col(0);
        blk.activation = pre.cwiseMax(S(0));
        blk.pooled_bins = bins / b.pool_freq;
        blk.pooled_frames = frames / b.pool_time;
        RowMatrixX<S> pooled = avg_pool(blk.activation, bins, frames, b.pool_freq, b.pool_time);
        blk.input = std::move(h);
        h = std::move(pooled);
        bins = blk.pooled_bins;
        frames = blk.pooled_frames;
        cache.blocks.push_back(std::move(blk));
    }

    // (channels, bins * frames) row-major is (channels * bins, frames) row-major.
    const int seq_dim = static_cast<int>(h.rows()) * bins;
    const int steps = frames;
    cache.sequence = Eigen::Map<const RowMatrixX<S>>(h.data(), seq_dim, steps);

    const Eigen::Index k = cfg.hidden;
    const auto wi = params.view("gru.w_input");
    const auto wh = params.view("gru.w_hidden");
    const auto bi = params.view("gru.b_input");
    const auto bh = params.view("gru.b_hidden");
    MatrixX<S> gates = wi * cache.sequence;
    gates.colwise() += bi.col(0);

    cache.hidden = MatrixX<S>::Zero(k, steps + 1);
    cache.reset.resize(k, steps);
    cache.update.resize(k, steps);
    cache.candidate.resize(k, steps);
    cache.hidden_proj.resize(k, steps);
    for (int t = 0; t < steps; ++t) {
        const VectorX<S> hp = cache.hidden.col(t);
        VectorX<S> gh = wh * hp;
        gh += bh.col(0);
        for (Eigen::Index j = 0; j < k; ++j) {
            const S r = sigmoid(gates(j, t) + gh(j));
            const S z = sigmoid(gates(k + j, t) + gh(k + j));
            const S n = std::tanh(gates(2 * k + j, t) + r * gh(2 * k + j));
            cache.reset(j, t) = r;
            cache.update(j, t) = z;
            cache.candidate(j, t) = n;
            cache.hidden_proj(j, t) = gh(2 * k + j);
            cache.hidden(j, t + 1) = (S(1) - z) * n + z * hp(j);
        }
    }
    const auto emb = cache.hidden.rightCols(steps);
    const int c = cfg.classes;

    auto to_grid = [&](const MatrixX<S>& m) {
        AccdoaGrid g = AccdoaGrid::zeros(c, steps);
        g.values = Eigen::Map<const MatrixX<S>>(m.data(), 3, static_cast<Eigen::Index>(c) * steps).template cast<double>();
        return g;
    };

    if (cfg.head == HeadVariant::accdoa) {
        MatrixX<S> out = params.view("head.weight") * emb;
        out.colwise() += params.view("head.bias").col(0);
        result.output = to_grid(out);
    } else {
        MatrixX<S> a1 = params.view("sed.fc1.weight") * emb;
        a1.colwise() += params.view("sed.fc1.bias").col(0);
        cache.sed_hidden = a1.cwiseMax(S(0));
        MatrixX<S> logits = params.view("sed.fc2.weight") * cache.sed_hidden;
        logits.colwise() += params.view("sed.fc2.bias").col(0);
        cache.sed_prob = logits.unaryExpr([](S v) { return sigmoid(v); });

        MatrixX<S> a2 = params.view("doa.fc1.weight") * emb;
        a2.colwise() += params.view("doa.fc1.bias").col(0);
        cache.doa_hidden = a2.cwiseMax(S(0));
        MatrixX<S> doa = params.view("doa.fc2.weight") * cache.doa_hidden;
        doa.colwise() += params.view("doa.fc2.bias").col(0);

        TwoBranchOutput out;
        out.sed = cache.sed_prob.template cast<double>();
        out.doa = to_grid(doa);
        result.output = std::move(out);
    }
    return result;
}

template <class S>
std::vector<ForwardResult<S>> Model<S>::forward_batch(const Parameters<S>& params,
                                                      const std::vector<FeatureTensor>& batch) const {
    std::vector<ForwardResult<S>> out;
    out.reserve(batch.size());
    for (const auto& x : batch) out.push_back(forward(params, x));
    return out;
}

template <class S>
VectorX<S> Model<S>::backward(const Parameters<S>& params, const ForwardCache<S>& cache,
                              const OutputGradient& grad) const {
    if (cache.params_identity != &params || cache.params_version != params.version())
        throw ContractViolation("forward cache is stale: parameters changed since forward()");

    const ModelConfig& cfg = config_;
    const ParameterLayout& lay = *layout_;
    const Eigen::Index k = cfg.hidden;
    const int steps = static_cast<int>(cache.reset.cols());
    const int c = cfg.classes;
    VectorX<S> g = VectorX<S>::Zero(lay.total());

    const auto emb = cache.hidden.rightCols(steps);
    MatrixX<S> demb;

    auto from_grid = [&](const AccdoaGrid& grid) -> MatrixX<S> {
        if (grid.classes != c || grid.frames != steps) throw DimensionError("output gradient has the wrong shape");
        return Eigen::Map<const MatrixX<double>>(grid.values.data(), 3 * c, steps).template cast<S>();
    };

    if (cfg.head == HeadVariant::accdoa) {
        const auto* dp = std::get_if<AccdoaGrid>(&grad);
        if (!dp) throw ContractViolation("ACCDOA head expects an ACCDOA output gradient");
        const MatrixX<S> dout = from_grid(*dp);
        grad_view(g, lay.at("head.weight")) = dout * emb.transpose();
        grad_view(g, lay.at("head.bias")) = dout.rowwise().sum();
        demb = params.view("head.weight").transpose() * dout;
    } else {
        const auto* dp = std::get_if<TwoBranchGradient>(&grad);
        if (!dp) throw ContractViolation("two-branch head expects a two-branch output gradient");
        if (dp->sed.rows() != c || dp->sed.cols() != steps) throw DimensionError("SED gradient has the wrong shape");

        // SED branch: through the sigmoid.
        const MatrixX<S> dprob = dp->sed.template cast<S>();
        const MatrixX<S> dlogit =
            dprob.cwiseProduct(cache.sed_prob.cwiseProduct((MatrixX<S>::Ones(c, steps) - cache.sed_prob)));
        grad_view(g, lay.at("sed.fc2.weight")) = dlogit * cache.sed_hidden.transpose();
        grad_view(g, lay.at("sed.fc2.bias")) = dlogit.rowwise().sum();
        MatrixX<S> da1 = params.view("sed.fc2.weight").transpose() * dlogit;
        da1 = da1.cwiseProduct((cache.sed_hidden.array() > S(0)).matrix().template cast<S>());
        grad_view(g, lay.at("sed.fc1.weight")) = da1 * emb.transpose();
        grad_view(g, lay.at("sed.fc1.bias")) = da1.rowwise().sum();
        demb = params.view("sed.fc1.weight").transpose() * da1;

        const MatrixX<S> ddoa = from_grid(dp->doa);
        grad_view(g, lay.at("doa.fc2.weight")) = ddoa * cache.doa_hidden.transpose();
        grad_view(g, lay.at("doa.fc2.bias")) = ddoa.rowwise().sum();
        MatrixX<S> da2 = params.view("doa.fc2.weight").transpose() * ddoa;
        da2 = da2.cwiseProduct((cache.doa_hidden.array() > S(0)).matrix().template cast<S>());
        grad_view(g, lay.at("doa.fc1.weight")) = da2 * emb.transpose();
        grad_view(g, lay.at("doa.fc1.bias")) = da2.rowwise().sum();
        demb += params.view("doa.fc1.weight").transpose() * da2;
    }

    // GRU, reverse time.
    const auto wh = params.view("gru.w_hidden");
    MatrixX<S> dgates(3 * k, steps);
    auto dwh = grad_view(g, lay.at("gru.w_hidden"));
    auto dbh = grad_view(g, lay.at("gru.b_hidden"));
    VectorX<S> dh_next = VectorX<S>::Zero(k);
    VectorX<S> dgh(3 * k);
    for (int t = steps - 1; t >= 0; --t) {
        const VectorX<S> dh = demb.col(t) + dh_next;
        VectorX<S> dh_prev(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const S r = cache.reset(j, t);
            const S z = cache.update(j, t);
            const S n = cache.candidate(j, t);
            const S hp = cache.hidden(j, t);
            const S dn = dh(j) * (S(1) - z);
            const S dz = dh(j) * (hp - n);
            dh_prev(j) = dh(j) * z;
            const S dn_pre = dn * (S(1) - n * n);
            const S dr = dn_pre * cache.hidden_proj(j, t);
            const S dr_pre = dr * r * (S(1) - r);
            const S dz_pre = dz * z * (S(1) - z);
            dgates(j, t) = dr_pre;
            dgates(k + j, t) = dz_pre;
            dgates(2 * k + j, t) = dn_pre;
            dgh(j) = dr_pre;
            dgh(k + j) = dz_pre;
            dgh(2 * k + j) = dn_pre * r;
        }
        dwh.noalias() += dgh * cache.hidden.col(t).transpose();
        dbh += dgh;
        dh_prev.noalias() += wh.transpose() * dgh;
        dh_next = dh_prev;
    }
    grad_view(g, lay.at("gru.w_input")) = dgates * cache.sequence.transpose();
    grad_view(g, lay.at("gru.b_input")) = dgates.rowwise().sum();
    if (cache.blocks.empty()) return g;

    const MatrixX<S> dseq = params.view("gru.w_input").transpose() * dgates;

    // Back to (channels, bins * frames) row-major.
    const auto& last = cache.blocks.back();
    RowMatrixX<S> dh_blk(cfg.blocks.back().channels, static_cast<Eigen::Index>(last.pooled_bins) * last.pooled_frames);
    Eigen::Map<RowMatrixX<S>>(dh_blk.data(), dseq.rows(), dseq.cols()) = dseq;

    RowMatrixX<S> cols;
    for (int i = static_cast<int>(cfg.blocks.size()) - 1; i >= 0; --i) {
        const auto& b = cfg.blocks[static_cast<std::size_t>(i)];
        const auto& blk = cache.blocks[static_cast<std::size_t>(i)];
        const std::string p = "conv" + std::to_string(i);
        RowMatrixX<S> dpre = avg_pool_backward(dh_blk, blk.bins, blk.frames, b.pool_freq, b.pool_time);
        dpre = dpre.cwiseProduct((blk.activation.array() > S(0)).matrix().template cast<S>());
        im2col(blk.input, blk.bins, blk.frames, b.kernel, cols);
        grad_view(g, lay.at(p + ".weight")) = dpre * cols.transpose();
        grad_view(g, lay.at(p + ".bias")) = dpre.rowwise().sum();
        if (i == 0) break;
        const RowMatrixX<S> dcols = params.view(p + ".weight").transpose() * dpre;
        col2im(dcols, static_cast<int>(blk.input.rows()), blk.bins, blk.frames, b.kernel, dh_blk);
    }
    return g;
}

template <class S>
AccdoaGrid Model<S>::predict(const Parameters<S>& params, const FeatureTensor& x) const {
    ForwardResult<S> r = forward(params, x);
    if (auto* g = std::get_if<AccdoaGrid>(&r.output)) return std::move(*g);
    return two_branch_to_accdoa(std::get<TwoBranchOutput>(r.output));
}

template class Parameters<float>;
template class Parameters<double>;
template class Model<float>;
template class Model<double>;

} // namespace accdoa
