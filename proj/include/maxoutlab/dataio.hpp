#ifndef MAXOUTLAB_DATAIO_HPP
#define MAXOUTLAB_DATAIO_HPP

#include <map>
#include <string>
#include <vector>

#include "maxoutlab/network.hpp"
#include "maxoutlab/tensor.hpp"

namespace maxoutlab {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    Tensor inputs;            ///< [N, d]
    std::vector<int> labels;  ///< length N, values in [0, classes)
    std::map<std::string, std::string> metadata;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.shape[1]; }

    /// Row-subset copy in the given index order.
    Dataset select(const std::vector<std::size_t>& idx) const;
};

/// Parses the IDX pair (magic 0x803 u8 images N x 28 x 28, magic 0x801 u8
/// labels).  Pixels are scaled to [0, 1].  Errors carry byte offsets.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a dataset back to the IDX pair; inputs must be [N, rows*cols] with
/// values in [0, 1] (stored as u8, value*255 rounded).
void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path, std::size_t rows = 28, std::size_t cols = 28);

/// Global contrast normalization, per example:
/// x' = s * (x - mean(x)) / sqrt(lambda + mean((x - mean(x))^2)).
Tensor gcn(const Tensor& X, double scale, double lambda);

struct ZcaTransform {
    Tensor mean;       ///< [d]
    Tensor whitening;  ///< [d, d], symmetric
    double epsilon = 0.0;
};

ZcaTransform zca_fit(const Tensor& X_train, double epsilon);
Tensor zca_apply(const ZcaTransform& t, const Tensor& X);

struct SplitSpec {
    enum class Mode { LastK, PerClass } mode = Mode::LastK;
    std::size_t valid_n = 0;      ///< LastK: validation size
    std::size_t per_class = 0;    ///< PerClass: validation examples per class
    std::uint64_t seed = 0;       ///< PerClass selection seed
};

struct SplitResult {
    Dataset train;
    Dataset valid;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> valid_idx;
};

SplitResult split(const Dataset& data, const SplitSpec& spec);

/// Labels come from a frozen randomly initialized maxout network.
struct TeacherDataset {
    Dataset data;
    NetworkSpec teacher_spec;
    Parameters teacher_params;
};
TeacherDataset synth_teacher(Prng& rng, const NetworkSpec& spec, std::size_t n);

/// Procedurally rendered 28 x 28 handwritten-style digits (10 classes):
/// per-class stroke skeletons under random affine distortion, stroke-width
/// jitter and pixel noise.  A deterministic desk-scale stand-in used when no
/// real digit corpus is on disk.
Dataset synth_digits(std::uint64_t seed, std::size_t n);

} // namespace maxoutlab

#endif
