#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcm/tensor.hpp"

namespace dcm {

/// Inputs plus integer labels. Inputs are [N x F] for vector data or
/// [N x c x h x w] for images; labels index classes 0..classes-1.
struct LabeledDataset {
  Tensor inputs;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
};

/// Per-stimulus label distributions, one row per judged stimulus.
/// indices[i] names the dataset row that probs row i describes.
struct HumanLabelSet {
  Tensor probs;  // [M x C], rows sum to 1
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

struct SplitResult {
  LabeledDataset train;
  LabeledDataset validation;
};

/// Gaussian blobs around well-separated class means. Means sit on a regular
/// simplex with edge length `separation` when dim allows (dim >= classes-1),
/// otherwise on seeded random directions of length `separation`.
LabeledDataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                         double separation, std::uint64_t seed);

/// Each class is a mixture of `modes_per_class` unit-variance clusters, with
/// modes of different classes interleaved so that no single center per class
/// separates the data. Samples within a class cycle through its modes.
LabeledDataset gen_multimodal(std::size_t classes, std::size_t modes_per_class,
                              std::size_t per_mode, std::size_t dim,
                              std::uint64_t seed);

/// IDX image+label pair (big-endian headers, unsigned pixel bytes).
/// Pixels are scaled to [0,1]; output shape is [N x 1 x rows x cols].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a [N x 1 x h x w] dataset as an IDX pair; values are quantized to
/// the nearest 1/255 step.
void save_idx(const LabeledDataset& data, const std::string& images_path,
              const std::string& labels_path);

/// CIFAR-10 binary batches: 3073-byte records, label byte then 3x1024
/// channel-planar pixels. Output is [N x 3 x 32 x 32] in [0,1], classes = 10.
LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths);

/// CSV rows "index, v0, ..., v{C-1}". Rows whose values sum beyond 1 + 1e-6
/// are treated as counts and normalized; otherwise they must already sum to 1
/// within 1e-6. Rows are sorted by stimulus index.
HumanLabelSet load_human_csv(const std::string& path, std::size_t classes);

/// Seeded stratified split preserving per-class proportions within one
/// example. Both sides receive at least one example of every class.
SplitResult split(const LabeledDataset& data, double fraction, std::uint64_t seed);

/// Copies the given rows (leading-axis indices) into a new tensor.
Tensor take_rows(const Tensor& inputs, const std::vector<std::size_t>& rows);

}  // namespace dcm
