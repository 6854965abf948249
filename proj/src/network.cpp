#include "maxoutlab/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace maxoutlab {

namespace {

using json = nlohmann::json;

// z[B x mk] += x[B x d] * W[d x mk]; same k-order accumulation as matmul.
void gemm_accum(const double* x, std::size_t rows, std::size_t inner, const double* w,
                std::size_t cols, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xrow = x + i * inner;
        double* orow = out + i * cols;
        for (std::size_t k = 0; k < inner; ++k) {
            const double xik = xrow[k];
            if (xik == 0.0) continue;
            const double* wrow = w + k * cols;
            for (std::size_t j = 0; j < cols; ++j) orow[j] += xik * wrow[j];
        }
    }
}

// out[d x mk] += x^T[d x B] * dz[B x mk]
void gemm_tn_accum(const double* x, std::size_t rows, std::size_t inner, const double* dz,
                   std::size_t cols, double* out) {
    for (std::size_t b = 0; b < rows; ++b) {
        const double* xrow = x + b * inner;
        const double* dzrow = dz + b * cols;
        for (std::size_t i = 0; i < inner; ++i) {
            const double xi = xrow[i];
            if (xi == 0.0) continue;
            double* orow = out + i * cols;
            for (std::size_t j = 0; j < cols; ++j) orow[j] += xi * dzrow[j];
        }
    }
}

// out[B x d] += dz[B x mk] * W^T[mk x d]
void gemm_nt_accum(const double* dz, std::size_t rows, std::size_t inner, const double* w,
                   std::size_t cols, double* out) {
    for (std::size_t b = 0; b < rows; ++b) {
        const double* dzrow = dz + b * inner;
        double* orow = out + b * cols;
        for (std::size_t j = 0; j < inner; ++j) {
            const double dzj = dzrow[j];
            if (dzj == 0.0) continue;
            const double* wcol = w + j; // stride inner over d
            for (std::size_t i = 0; i < cols; ++i) orow[i] += dzj * wcol[i * inner];
        }
    }
}

const char* type_name(LayerType t) {
    switch (t) {
        case LayerType::Maxout: return "maxout";
        case LayerType::Rectifier: return "rectifier";
        case LayerType::RectifierPool: return "rectifier_pool";
        case LayerType::Tanh: return "tanh";
        case LayerType::Linear: return "linear";
        case LayerType::SoftmaxOutput: return "softmax";
    }
    return "?";
}

LayerType type_from_name(const std::string& s) {
    if (s == "maxout") return LayerType::Maxout;
    if (s == "rectifier") return LayerType::Rectifier;
    if (s == "rectifier_pool") return LayerType::RectifierPool;
    if (s == "tanh") return LayerType::Tanh;
    if (s == "linear") return LayerType::Linear;
    if (s == "softmax") return LayerType::SoftmaxOutput;
    throw std::invalid_argument("unknown layer type: " + s);
}

} // namespace

std::string LayerKind::name() const { return type_name(type); }

void NetworkSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("NetworkSpec: input_dim must be >= 1");
    if (layers.empty()) throw std::invalid_argument("NetworkSpec: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerKind& k = layers[l];
        const bool last = (l + 1 == layers.size());
        if (k.type == LayerType::SoftmaxOutput) {
            if (!last) throw std::invalid_argument("NetworkSpec: softmax must be the last layer");
            if (k.units < 2) throw std::invalid_argument("NetworkSpec: softmax needs >= 2 classes");
        } else if (last && k.type != LayerType::Linear) {
            // Linear last is allowed for regression heads (the two-unit
            // approximator); classifiers must end in softmax.
            throw std::invalid_argument("NetworkSpec: last layer must be softmax or linear");
        }
        if (k.units < 1) throw std::invalid_argument("NetworkSpec: units must be >= 1");
        if (k.pieces < 1) throw std::invalid_argument("NetworkSpec: pieces must be >= 1");
        if (!k.pooled() && k.pieces != 1)
            throw std::invalid_argument("NetworkSpec: pieces > 1 only for pooled kinds");
    }
}

Parameters init_params(const NetworkSpec& spec, Prng& rng, double sigma) {
    spec.validate();
    if (sigma < 0.0) throw std::domain_error("init_params: sigma must be >= 0");
    Parameters params;
    params.reserve(spec.layer_count());
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto d = static_cast<std::size_t>(spec.layer_input_dim(l));
        const auto m = static_cast<std::size_t>(spec.layers[l].units);
        const auto k = static_cast<std::size_t>(spec.layers[l].pieces);
        LayerParams p;
        p.W = sigma == 0.0 ? Tensor::zeros({d, m, k}) : sample_normal(rng, 0.0, sigma, {d, m, k});
        p.b = Tensor::zeros({m, k});
        params.push_back(std::move(p));
    }
    return params;
}

ForwardTrace forward(const Parameters& params, const NetworkSpec& spec, const Tensor& x,
                     const MaskSet* mask) {
    if (x.rank() != 2 || x.shape[1] != static_cast<std::size_t>(spec.input_dim))
        throw DimensionError("forward: input " + x.shape_str() + " does not match input_dim " +
                             std::to_string(spec.input_dim));
    if (params.size() != spec.layer_count())
        throw DimensionError("forward: parameter count does not match spec");
    const std::size_t batch = x.shape[0];

    ForwardTrace trace;
    const std::size_t L = spec.layer_count();
    trace.inputs.resize(L);
    trace.z.resize(L);
    trace.h.resize(L);
    trace.argmax.resize(L);

    Tensor cur = x;
    for (std::size_t l = 0; l < L; ++l) {
        const LayerKind& kind = spec.layers[l];
        const auto d = static_cast<std::size_t>(spec.layer_input_dim(l));
        const auto m = static_cast<std::size_t>(kind.units);
        const auto k = static_cast<std::size_t>(kind.pieces);
        if (cur.shape[1] != d)
            throw DimensionError("forward: layer " + std::to_string(l) + " input width mismatch");

        if (mask) {
            if (mask->masks.size() != L || !mask->masks[l].same_shape(cur))
                throw DimensionError("forward: mask shape mismatch at layer " + std::to_string(l));
            const Tensor& mu = mask->masks[l];
            for (std::size_t i = 0; i < cur.data.size(); ++i) cur.data[i] *= mu.data[i];
        }
        trace.inputs[l] = cur;

        // z = input * W + b
        const std::size_t mk = m * k;
        Tensor z = Tensor::zeros({batch, m, k});
        for (std::size_t b = 0; b < batch; ++b)
            std::memcpy(&z.data[b * mk], params[l].b.data.data(), mk * sizeof(double));
        gemm_accum(cur.data.data(), batch, d, params[l].W.data.data(), mk, z.data.data());

        Tensor h = Tensor::zeros({batch, m});
        switch (kind.type) {
            case LayerType::Maxout:
            case LayerType::RectifierPool: {
                std::vector<int>& arg = trace.argmax[l];
                arg.assign(batch * m, 0);
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* zp = &z.data[(b * m + i) * k];
                        double best = zp[0];
                        int best_j = 0;
                        for (std::size_t j = 1; j < k; ++j)
                            if (zp[j] > best) {
                                best = zp[j];
                                best_j = static_cast<int>(j);
                            }
                        if (kind.type == LayerType::RectifierPool && kind.include_zero &&
                            best <= 0.0) {
                            // the constant 0 wins the pool; no piece is maximal
                            best = 0.0;
                            best_j = -1;
                        }
                        h.at(b, i) = best;
                        arg[b * m + i] = best_j;
                    }
                }
                break;
            }
            case LayerType::Rectifier:
                for (std::size_t i = 0; i < h.data.size(); ++i)
                    h.data[i] = z.data[i] > 0.0 ? z.data[i] : 0.0;
                break;
            case LayerType::Tanh:
                for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] = std::tanh(z.data[i]);
                break;
            case LayerType::Linear:
                h.data = z.data;
                break;
            case LayerType::SoftmaxOutput: {
                for (std::size_t b = 0; b < batch; ++b) {
                    const double* zp = &z.data[b * m];
                    double mx = zp[0];
                    for (std::size_t i = 1; i < m; ++i) mx = std::max(mx, zp[i]);
                    double sum = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        const double e = std::exp(zp[i] - mx);
                        h.at(b, i) = e;
                        sum += e;
                    }
                    for (std::size_t i = 0; i < m; ++i) h.at(b, i) /= sum;
                }
                break;
            }
        }
        trace.z[l] = std::move(z);
        trace.h[l] = h;
        cur = std::move(h);
    }
    trace.probs = trace.h.back();
    if (mask) trace.masks = *mask;
    return trace;
}

Gradients backward(const Parameters& params, const NetworkSpec& spec, const ForwardTrace& trace,
                   const std::vector<int>& labels) {
    const std::size_t L = spec.layer_count();
    if (trace.h.size() != L || trace.inputs.size() != L)
        throw std::invalid_argument("backward: trace does not match spec");
    const std::size_t batch = trace.probs.shape[0];
    if (labels.size() != batch)
        throw std::invalid_argument("backward: label count does not match batch");
    if (spec.layers.back().type != LayerType::SoftmaxOutput)
        throw std::invalid_argument("backward: network has no softmax output");
    const int classes = spec.output_classes();
    for (int y : labels)
        if (y < 0 || y >= classes) throw std::invalid_argument("backward: label out of range");

    Gradients grads(L);
    // dz of the softmax layer under mean negative log-likelihood
    Tensor dh;  // gradient w.r.t. the current layer's activation h
    for (std::size_t l_plus = L; l_plus-- > 0;) {
        const std::size_t l = l_plus;
        const LayerKind& kind = spec.layers[l];
        const auto d = static_cast<std::size_t>(spec.layer_input_dim(l));
        const auto m = static_cast<std::size_t>(kind.units);
        const auto k = static_cast<std::size_t>(kind.pieces);
        const std::size_t mk = m * k;
        if (trace.inputs[l].shape[1] != d || trace.z[l].shape[1] != m)
            throw std::invalid_argument("backward: stale trace at layer " + std::to_string(l));

        Tensor dz = Tensor::zeros({batch, m, k});
        switch (kind.type) {
            case LayerType::SoftmaxOutput: {
                const double inv_b = 1.0 / static_cast<double>(batch);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t i = 0; i < m; ++i)
                        dz.data[b * m + i] =
                            (trace.probs.at(b, i) -
                             (static_cast<std::size_t>(labels[b]) == i ? 1.0 : 0.0)) *
                            inv_b;
                break;
            }
            case LayerType::Maxout:
            case LayerType::RectifierPool: {
                const std::vector<int>& arg = trace.argmax[l];
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t i = 0; i < m; ++i) {
                        const int j = arg[b * m + i];
                        if (j >= 0)
                            dz.data[(b * m + i) * k + static_cast<std::size_t>(j)] =
                                dh.at(b, i);
                    }
                break;
            }
            case LayerType::Rectifier:
                for (std::size_t i = 0; i < dz.data.size(); ++i)
                    dz.data[i] = trace.z[l].data[i] > 0.0 ? dh.data[i] : 0.0;
                break;
            case LayerType::Tanh:
                for (std::size_t i = 0; i < dz.data.size(); ++i) {
                    const double hv = trace.h[l].data[i];
                    dz.data[i] = dh.data[i] * (1.0 - hv * hv);
                }
                break;
            case LayerType::Linear:
                dz.data = dh.data;
                break;
        }

        LayerParams& g = grads[l];
        g.W = Tensor::zeros({d, m, k});
        g.b = Tensor::zeros({m, k});
        gemm_tn_accum(trace.inputs[l].data.data(), batch, d, dz.data.data(), mk,
                      g.W.data.data());
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < mk; ++i) g.b.data[i] += dz.data[b * mk + i];

        if (l > 0) {
            Tensor dinput = Tensor::zeros({batch, d});
            gemm_nt_accum(dz.data.data(), batch, mk, params[l].W.data.data(), d,
                          dinput.data.data());
            if (trace.masks) {
                const Tensor& mu = trace.masks->masks[l];
                for (std::size_t i = 0; i < dinput.data.size(); ++i)
                    dinput.data[i] *= mu.data[i];
            }
            dh = std::move(dinput);
        }
    }
    return grads;
}

void project_max_norm(Parameters& params, double c, bool include_biases) {
    if (!(c > 0.0)) throw std::domain_error("project_max_norm: c must be positive");
    for (LayerParams& p : params) {
        const std::size_t d = p.W.shape[0];
        const std::size_t mk = p.W.shape[1] * p.W.shape[2];
        for (std::size_t col = 0; col < mk; ++col) {
            double sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double w = p.W.data[i * mk + col];
                sq += w * w;
            }
            if (include_biases) sq += p.b.data[col] * p.b.data[col];
            const double norm = std::sqrt(sq);
            if (norm > c) {
                const double scale = c / norm;
                for (std::size_t i = 0; i < d; ++i) p.W.data[i * mk + col] *= scale;
                if (include_biases) p.b.data[col] *= scale;
            }
        }
    }
}

double log_likelihood(const ForwardTrace& trace, const std::vector<int>& labels) {
    const std::size_t batch = trace.probs.shape[0];
    if (labels.size() != batch)
        throw std::invalid_argument("log_likelihood: label count does not match batch");
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        double p = trace.probs.at(b, static_cast<std::size_t>(labels[b]));
        if (p < 1e-300) p = 1e-300;
        sum += std::log(p);
    }
    return sum / static_cast<double>(batch);
}

double error_rate(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t batch = probs.shape[0];
    const std::size_t classes = probs.shape[1];
    std::size_t wrong = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < classes; ++i)
            if (probs.at(b, i) > probs.at(b, best)) best = i;
        if (best != static_cast<std::size_t>(labels[b])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(batch);
}

namespace {

constexpr char kModelMagic[8] = {'M', 'X', 'L', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kModelVersion = 1;

json spec_to_json(const NetworkSpec& spec) {
    json layers = json::array();
    for (const LayerKind& k : spec.layers) {
        json jl = {{"type", type_name(k.type)}, {"units", k.units}};
        if (k.pooled()) jl["pieces"] = k.pieces;
        if (k.type == LayerType::RectifierPool) jl["include_zero"] = k.include_zero;
        layers.push_back(jl);
    }
    return {{"input_dim", spec.input_dim}, {"layers", layers}};
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    for (const json& jl : j.at("layers")) {
        LayerKind k;
        k.type = type_from_name(jl.at("type").get<std::string>());
        k.units = jl.at("units").get<int>();
        k.pieces = jl.value("pieces", 1);
        k.include_zero = jl.value("include_zero", false);
        spec.layers.push_back(k);
    }
    spec.validate();
    return spec;
}

} // namespace

void save_model(const std::string& path, const NetworkSpec& spec, const Parameters& params) {
    spec.validate();
    json tensors = json::array();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < params.size(); ++l) {
        for (const char* part : {"W", "b"}) {
            const Tensor& t = part[0] == 'W' ? params[l].W : params[l].b;
            tensors.push_back({{"name", "layer" + std::to_string(l) + "." + part},
                               {"shape", t.shape},
                               {"offset", offset},
                               {"count", t.size()}});
            offset += t.size();
        }
    }
    const json header = {{"format_version", kModelVersion},
                         {"spec", spec_to_json(spec)},
                         {"tensors", tensors}};
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    const std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const LayerParams& p : params) {
        out.write(reinterpret_cast<const char*>(p.W.data.data()),
                  static_cast<std::streamsize>(p.W.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(p.b.data.data()),
                  static_cast<std::streamsize>(p.b.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_model: bad magic in " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("load_model: truncated header in " + path);
    const json header = json::parse(hs);
    if (header.at("format_version").get<std::uint32_t>() != kModelVersion)
        throw std::runtime_error("load_model: unsupported format version");

    LoadedModel model;
    model.spec = spec_from_json(header.at("spec"));
    model.params.resize(model.spec.layer_count());
    for (const json& jt : header.at("tensors")) {
        const std::string name = jt.at("name").get<std::string>();
        const std::size_t l = std::stoul(name.substr(5));
        Tensor t = Tensor::zeros(jt.at("shape").get<std::vector<std::size_t>>());
        if (t.size() != jt.at("count").get<std::size_t>())
            throw std::runtime_error("load_model: inconsistent tensor entry " + name);
        in.seekg(static_cast<std::streamoff>(sizeof(kModelMagic) + sizeof(hlen) + hlen +
                                             jt.at("offset").get<std::size_t>() *
                                                 sizeof(double)));
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw std::runtime_error("load_model: truncated payload at " + name);
        if (name.ends_with(".W"))
            model.params[l].W = std::move(t);
        else
            model.params[l].b = std::move(t);
    }
    return model;
}

} // namespace maxoutlab
