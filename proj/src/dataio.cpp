#include "maxoutlab/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Dense>

namespace maxoutlab {

namespace {

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in)
        throw ParseError(path + ": truncated at byte " + std::to_string(offset) +
                         " (expected 4-byte big-endian integer)");
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

Dataset Dataset::select(const std::vector<std::size_t>& idx) const {
    Dataset out;
    const std::size_t d = dim();
    out.inputs = Tensor::zeros({idx.size(), d});
    out.labels.reserve(idx.size());
    out.metadata = metadata;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::memcpy(&out.inputs.data[r * d], &inputs.data[idx[r] * d], d * sizeof(double));
        out.labels.push_back(labels[idx[r]]);
    }
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw ParseError(images_path + ": cannot open");
    const std::uint32_t img_magic = read_u32_be(img, images_path, 0);
    if (img_magic != 0x00000803)
        throw ParseError(images_path + ": bad magic at byte 0: expected 0x00000803, got 0x" +
                         [&] { char b[16]; std::snprintf(b, 16, "%08x", img_magic); return std::string(b); }());
    const std::uint32_t n_images = read_u32_be(img, images_path, 4);
    const std::uint32_t rows = read_u32_be(img, images_path, 8);
    const std::uint32_t cols = read_u32_be(img, images_path, 12);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw ParseError(labels_path + ": cannot open");
    const std::uint32_t lab_magic = read_u32_be(lab, labels_path, 0);
    if (lab_magic != 0x00000801)
        throw ParseError(labels_path + ": bad magic at byte 0: expected 0x00000801, got 0x" +
                         [&] { char b[16]; std::snprintf(b, 16, "%08x", lab_magic); return std::string(b); }());
    const std::uint32_t n_labels = read_u32_be(lab, labels_path, 4);
    if (n_images != n_labels)
        throw ParseError("count mismatch: " + images_path + " has " + std::to_string(n_images) +
                         " images but " + labels_path + " has " + std::to_string(n_labels) +
                         " labels");

    const std::size_t d = std::size_t(rows) * cols;
    Dataset data;
    data.inputs = Tensor::zeros({n_images, d});
    data.labels.resize(n_images);
    std::vector<unsigned char> buf(d);
    for (std::size_t i = 0; i < n_images; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(d));
        if (!img)
            throw ParseError(images_path + ": truncated at byte " +
                             std::to_string(16 + i * d) + " (image " + std::to_string(i) + ")");
        for (std::size_t p = 0; p < d; ++p)
            data.inputs.data[i * d + p] = static_cast<double>(buf[p]) / 255.0;
    }
    std::vector<unsigned char> lbuf(n_labels);
    lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n_labels));
    if (!lab)
        throw ParseError(labels_path + ": truncated label payload after byte 8");
    for (std::size_t i = 0; i < n_labels; ++i) data.labels[i] = lbuf[i];

    data.metadata["source"] = images_path;
    data.metadata["format"] = "idx-u8";
    return data;
}

void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path, std::size_t rows, std::size_t cols) {
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    if (d != rows * cols) throw std::invalid_argument("save_idx: dim != rows*cols");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("save_idx: cannot open " + images_path);
    write_u32_be(img, 0x00000803);
    write_u32_be(img, static_cast<std::uint32_t>(n));
    write_u32_be(img, static_cast<std::uint32_t>(rows));
    write_u32_be(img, static_cast<std::uint32_t>(cols));
    std::vector<unsigned char> buf(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < d; ++p) {
            double v = data.inputs.data[i * d + p];
            v = std::min(1.0, std::max(0.0, v));
            buf[p] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        img.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(d));
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("save_idx: cannot open " + labels_path);
    write_u32_be(lab, 0x00000801);
    write_u32_be(lab, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char l = static_cast<unsigned char>(data.labels[i]);
        lab.write(reinterpret_cast<const char*>(&l), 1);
    }
}

Tensor gcn(const Tensor& X, double scale, double lambda) {
    if (!(scale > 0.0)) throw std::domain_error("gcn: scale must be positive");
    if (lambda < 0.0) throw std::domain_error("gcn: lambda must be >= 0");
    const std::size_t n = X.shape[0], d = X.shape[1];
    Tensor out = Tensor::zeros({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &X.data[i * d];
        double mean = 0.0;
        for (std::size_t p = 0; p < d; ++p) mean += row[p];
        mean /= static_cast<double>(d);
        double power = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            const double c = row[p] - mean;
            power += c * c;
        }
        power /= static_cast<double>(d);
        const double denom = std::sqrt(lambda + power);
        double* orow = &out.data[i * d];
        if (denom == 0.0) {
            // constant image with lambda == 0: leave as zeros
            continue;
        }
        for (std::size_t p = 0; p < d; ++p) orow[p] = scale * (row[p] - mean) / denom;
    }
    return out;
}

ZcaTransform zca_fit(const Tensor& X, double epsilon) {
    if (!(epsilon > 0.0)) throw std::domain_error("zca_fit: epsilon must be positive");
    const std::size_t n = X.shape[0], d = X.shape[1];
    ZcaTransform t;
    t.epsilon = epsilon;
    t.mean = Tensor::zeros({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < d; ++p) t.mean.data[p] += X.data[i * d + p];
    for (double& v : t.mean.data) v /= static_cast<double>(n);

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                              static_cast<Eigen::Index>(d));
    Eigen::VectorXd row(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < d; ++p)
            row(static_cast<Eigen::Index>(p)) = X.data[i * d + p] - t.mean.data[p];
        C.noalias() += row * row.transpose();
    }
    C /= static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("zca_fit: eigendecomposition failed");
    Eigen::VectorXd inv_sqrt = (eig.eigenvalues().array() + epsilon).rsqrt();
    Eigen::MatrixXd M =
        eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();

    t.whitening = Tensor::zeros({d, d});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            t.whitening.at(i, j) = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return t;
}

Tensor zca_apply(const ZcaTransform& t, const Tensor& X) {
    const std::size_t n = X.shape[0], d = X.shape[1];
    if (d != t.mean.shape[0])
        throw DimensionError("zca_apply: input width " + std::to_string(d) +
                             " does not match transform dim " + std::to_string(t.mean.shape[0]));
    Tensor centered = X;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < d; ++p) centered.data[i * d + p] -= t.mean.data[p];
    return matmul(centered, t.whitening);
}

SplitResult split(const Dataset& data, const SplitSpec& spec) {
    const std::size_t n = data.size();
    SplitResult res;
    if (spec.mode == SplitSpec::Mode::LastK) {
        if (spec.valid_n >= n)
            throw std::domain_error("split: valid_n " + std::to_string(spec.valid_n) +
                                    " leaves no training data out of " + std::to_string(n));
        for (std::size_t i = 0; i + spec.valid_n < n; ++i) res.train_idx.push_back(i);
        for (std::size_t i = n - spec.valid_n; i < n; ++i) res.valid_idx.push_back(i);
    } else {
        int classes = 0;
        for (int l : data.labels) classes = std::max(classes, l + 1);
        std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
        for (std::size_t i = 0; i < n; ++i)
            by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
        Prng rng(spec.seed, 0x5eed);
        std::vector<char> is_valid(n, 0);
        for (auto& cls : by_class) {
            if (cls.size() < spec.per_class)
                throw std::domain_error("split: class with " + std::to_string(cls.size()) +
                                        " examples cannot supply " +
                                        std::to_string(spec.per_class));
            // seeded partial Fisher-Yates selection
            for (std::size_t i = 0; i < spec.per_class; ++i) {
                const std::size_t j = i + rng.below(cls.size() - i);
                std::swap(cls[i], cls[j]);
                is_valid[cls[i]] = 1;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            (is_valid[i] ? res.valid_idx : res.train_idx).push_back(i);
    }
    res.train = data.select(res.train_idx);
    res.valid = data.select(res.valid_idx);
    return res;
}

TeacherDataset synth_teacher(Prng& rng, const NetworkSpec& spec, std::size_t n) {
    if (n < 1) throw std::domain_error("synth_teacher: n must be >= 1");
    spec.validate();
    TeacherDataset out;
    out.teacher_spec = spec;
    Prng param_rng = rng.split(1);
    Prng input_rng = rng.split(2);
    out.teacher_params = init_params(spec, param_rng, 1.0);
    out.data.inputs =
        sample_normal(input_rng, 0.0, 1.0, {n, static_cast<std::size_t>(spec.input_dim)});
    const ForwardTrace trace = forward(out.teacher_params, spec, out.data.inputs);
    out.data.labels.resize(n);
    const std::size_t classes = static_cast<std::size_t>(spec.output_classes());
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (trace.probs.at(i, c) > trace.probs.at(i, best)) best = c;
        out.data.labels[i] = static_cast<int>(best);
    }
    out.data.metadata["source"] = "synth_teacher";
    return out;
}

namespace {

struct Pt {
    double x, y;
};
using Stroke = std::vector<Pt>;

// Stroke skeletons per digit in the unit square, y pointing down.
const std::array<std::vector<Stroke>, 10>& digit_strokes() {
    static const std::array<std::vector<Stroke>, 10> strokes = [] {
        std::array<std::vector<Stroke>, 10> s;
        auto ellipse = [](double cx, double cy, double rx, double ry, int n = 14) {
            Stroke e;
            for (int i = 0; i <= n; ++i) {
                const double a = 2.0 * 3.14159265358979323846 * i / n;
                e.push_back({cx + rx * std::sin(a), cy - ry * std::cos(a)});
            }
            return e;
        };
        s[0] = {ellipse(0.5, 0.5, 0.21, 0.32)};
        s[1] = {{{0.38, 0.28}, {0.52, 0.15}, {0.52, 0.85}}};
        s[2] = {{{0.3, 0.3},
                 {0.36, 0.18},
                 {0.55, 0.15},
                 {0.68, 0.24},
                 {0.68, 0.38},
                 {0.3, 0.82},
                 {0.72, 0.82}}};
        s[3] = {{{0.32, 0.2}, {0.52, 0.15}, {0.68, 0.26}, {0.62, 0.42}, {0.48, 0.47}},
                {{0.48, 0.47}, {0.66, 0.54}, {0.7, 0.68}, {0.56, 0.83}, {0.32, 0.78}}};
        s[4] = {{{0.6, 0.15}, {0.28, 0.62}, {0.76, 0.62}}, {{0.62, 0.4}, {0.62, 0.86}}};
        s[5] = {{{0.68, 0.16}, {0.34, 0.16}, {0.32, 0.45}},
                {{0.32, 0.45}, {0.58, 0.4}, {0.7, 0.55}, {0.62, 0.77}, {0.32, 0.78}}};
        s[6] = {{{0.64, 0.16}, {0.45, 0.26}, {0.34, 0.45}, {0.33, 0.66}},
                ellipse(0.49, 0.65, 0.17, 0.17, 12)};
        s[7] = {{{0.28, 0.18}, {0.72, 0.18}, {0.44, 0.85}}};
        s[8] = {ellipse(0.5, 0.32, 0.16, 0.16, 12), ellipse(0.5, 0.66, 0.19, 0.18, 12)};
        s[9] = {ellipse(0.52, 0.33, 0.17, 0.17, 12),
                {{0.69, 0.35}, {0.66, 0.6}, {0.55, 0.85}}};
        return s;
    }();
    return strokes;
}

double point_segment_dist(double px, double py, const Pt& a, const Pt& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double wx = px - a.x, wy = py - a.y;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace

Dataset synth_digits(std::uint64_t seed, std::size_t n) {
    if (n < 1) throw std::domain_error("synth_digits: n must be >= 1");
    constexpr std::size_t kSide = 28;
    constexpr double kBox = 20.0; // pixel extent of the unit glyph box

    Dataset data;
    data.inputs = Tensor::zeros({n, kSide * kSide});
    data.labels.resize(n);
    Prng order_rng(seed, 0xd161);

    for (std::size_t i = 0; i < n; ++i) {
        const int digit = static_cast<int>(i % 10);
        Prng rng = order_rng.split(i);

        const double angle = (rng.uniform() - 0.5) * 0.5;
        const double sx = 0.85 + rng.uniform() * 0.3;
        const double sy = 0.85 + rng.uniform() * 0.3;
        const double shear = (rng.uniform() - 0.5) * 0.35;
        const double tx = (rng.uniform() - 0.5) * 3.4;
        const double ty = (rng.uniform() - 0.5) * 3.4;
        const double half_width = 0.7 + rng.uniform() * 0.8;

        const double ca = std::cos(angle), sa = std::sin(angle);
        auto to_px = [&](const Pt& p) {
            double ux = (p.x - 0.5) * sx;
            double uy = (p.y - 0.5) * sy;
            ux += shear * uy;
            const double rx = ca * ux - sa * uy;
            const double ry = sa * ux + ca * uy;
            return Pt{14.0 + rx * kBox + tx, 14.0 + ry * kBox + ty};
        };

        std::vector<std::pair<Pt, Pt>> segs;
        for (const Stroke& st : digit_strokes()[static_cast<std::size_t>(digit)])
            for (std::size_t p = 0; p + 1 < st.size(); ++p)
                segs.emplace_back(to_px(st[p]), to_px(st[p + 1]));

        double* img = &data.inputs.data[i * kSide * kSide];
        for (std::size_t y = 0; y < kSide; ++y) {
            for (std::size_t x = 0; x < kSide; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double best = 1e9;
                for (const auto& [a, b] : segs)
                    best = std::min(best, point_segment_dist(px, py, a, b));
                double v = (half_width + 0.5 - best) / 1.0;
                v = std::min(1.0, std::max(0.0, v));
                const double noise = rng.normal(0.0, 0.06);
                img[y * kSide + x] = std::min(1.0, std::max(0.0, v + noise));
            }
        }
        data.labels[i] = digit;
    }

    // shuffle rows so contiguous subsets stay class balanced but unordered
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = order_rng.below(i);
        std::swap(perm[i - 1], perm[j]);
    }
    Dataset out = data.select(perm);
    out.metadata["source"] = "synth_digits";
    out.metadata["seed"] = std::to_string(seed);
    return out;
}

} // namespace maxoutlab
