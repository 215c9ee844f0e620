#include "dcm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

namespace {

// Vertices of a regular simplex with `count` corners and unit edge length,
// embedded in `dim` >= count-1 coordinates.
std::vector<std::vector<double>> simplex_vertices(std::size_t count, std::size_t dim) {
  std::vector<std::vector<double>> pts(count, std::vector<double>(dim, 0.0));
  for (std::size_t i = 1; i < count; ++i) {
    // centroid of the points placed so far
    for (std::size_t d = 0; d < dim; ++d) {
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) acc += pts[j][d];
      pts[i][d] = acc / static_cast<double>(i);
    }
    double r2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      double diff = pts[i][d] - pts[0][d];
      r2 += diff * diff;
    }
    pts[i][i - 1] = std::sqrt(1.0 - r2);
  }
  // center at the origin so generated data has zero mean overall
  for (std::size_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (const auto& p : pts) acc += p[d];
    acc /= static_cast<double>(count);
    for (auto& p : pts) p[d] -= acc;
  }
  return pts;
}

}  // namespace

LabeledDataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                         double separation, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("gen_blobs: need at least 2 classes");
  if (per_class < 1) throw ConfigError("gen_blobs: per_class must be positive");
  if (dim < 1) throw ConfigError("gen_blobs: dim must be positive");
  if (!(separation > 0.0)) throw ConfigError("gen_blobs: separation must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> means;
  if (dim >= classes - 1) {
    means = simplex_vertices(classes, dim);
    for (auto& m : means) {
      for (double& v : m) v *= separation;
    }
  } else {
    // no regular simplex fits; use random unit directions at the same radius
    means.assign(classes, std::vector<double>(dim, 0.0));
    for (auto& m : means) {
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (double& v : m) {
          v = normal(rng);
          norm2 += v * v;
        }
      } while (norm2 == 0.0);
      const double r = separation / std::sqrt(norm2);
      for (double& v : m) v *= r;
    }
  }

  LabeledDataset out;
  out.classes = classes;
  out.inputs = Tensor({classes * per_class, dim});
  out.labels.reserve(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (std::size_t d = 0; d < dim; ++d) {
        out.inputs[row * dim + d] = means[c][d] + normal(rng);
      }
      out.labels.push_back(c);
    }
  }
  return out;
}

LabeledDataset gen_multimodal(std::size_t classes, std::size_t modes_per_class,
                              std::size_t per_mode, std::size_t dim,
                              std::uint64_t seed) {
  if (classes < 2) throw ConfigError("gen_multimodal: need at least 2 classes");
  if (modes_per_class < 2) throw ConfigError("gen_multimodal: modes_per_class must be >= 2");
  if (per_mode < 1) throw ConfigError("gen_multimodal: per_mode must be positive");
  if (dim < 1) throw ConfigError("gen_multimodal: dim must be positive");

  const std::size_t total_modes = classes * modes_per_class;
  // mode t belongs to class t mod C, so neighbouring modes always differ in
  // class and a class's own modes are spread apart
  std::vector<std::vector<double>> modes(total_modes, std::vector<double>(dim, 0.0));
  if (dim == 1) {
    const double mid = 4.0 * static_cast<double>(total_modes - 1);
    for (std::size_t t = 0; t < total_modes; ++t) {
      modes[t][0] = 8.0 * static_cast<double>(t) - mid;
    }
  } else {
    // circle radius chosen so adjacent modes sit 8 units apart
    const double step = std::numbers::pi / static_cast<double>(total_modes);
    const double radius = 4.0 / std::sin(step);
    for (std::size_t t = 0; t < total_modes; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) /
                           static_cast<double>(total_modes);
      modes[t][0] = radius * std::cos(angle);
      modes[t][1] = radius * std::sin(angle);
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t per_class = modes_per_class * per_mode;
  LabeledDataset out;
  out.classes = classes;
  out.inputs = Tensor({classes * per_class, dim});
  out.labels.reserve(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      // cycle modes so the first K samples of a class cover K distinct modes
      const std::size_t mode_idx = (s % modes_per_class) * classes + c;
      for (std::size_t d = 0; d < dim; ++d) {
        out.inputs[row * dim + d] = modes[mode_idx][d] + normal(rng);
      }
      out.labels.push_back(c);
    }
  }
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at,
                   const std::string& path) {
  if (at + 4 > b.size()) {
    throw FormatError(path + ": truncated at byte " + std::to_string(at));
  }
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const std::vector<unsigned char> img = read_file(images_path);
  const std::uint32_t img_magic = be32(img, 0, images_path);
  if (img_magic != 0x00000803u) {
    throw FormatError(images_path + ": bad magic at byte 0 (expected 0x00000803)");
  }
  const std::uint32_t n = be32(img, 4, images_path);
  const std::uint32_t rows = be32(img, 8, images_path);
  const std::uint32_t cols = be32(img, 12, images_path);
  const std::size_t pixel_bytes = std::size_t(n) * rows * cols;
  if (img.size() != 16 + pixel_bytes) {
    throw FormatError(images_path + ": expected " + std::to_string(16 + pixel_bytes) +
                      " bytes, found " + std::to_string(img.size()) +
                      " (truncated at byte " + std::to_string(img.size()) + ")");
  }

  const std::vector<unsigned char> lab = read_file(labels_path);
  const std::uint32_t lab_magic = be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u) {
    throw FormatError(labels_path + ": bad magic at byte 0 (expected 0x00000801)");
  }
  const std::uint32_t ln = be32(lab, 4, labels_path);
  if (ln != n) {
    throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                      " does not match image count " + std::to_string(n));
  }
  if (lab.size() != 8 + ln) {
    throw FormatError(labels_path + ": expected " + std::to_string(8 + ln) +
                      " bytes, found " + std::to_string(lab.size()) +
                      " (truncated at byte " + std::to_string(lab.size()) + ")");
  }

  LabeledDataset out;
  out.inputs = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < pixel_bytes; ++i) {
    out.inputs[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  out.labels.reserve(n);
  std::size_t max_label = 0;
  for (std::uint32_t i = 0; i < ln; ++i) {
    out.labels.push_back(lab[8 + i]);
    max_label = std::max<std::size_t>(max_label, lab[8 + i]);
  }
  out.classes = n > 0 ? max_label + 1 : 0;
  return out;
}

void save_idx(const LabeledDataset& data, const std::string& images_path,
              const std::string& labels_path) {
  if (data.inputs.rank() != 4 || data.inputs.shape()[1] != 1) {
    throw DimensionError("save_idx expects [N x 1 x h x w] inputs, got " +
                         shape_str(data.inputs.shape()));
  }
  const std::size_t n = data.inputs.shape()[0];
  const std::size_t rows = data.inputs.shape()[2];
  const std::size_t cols = data.inputs.shape()[3];

  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw IoError("cannot write " + images_path);
  put_be32(img, 0x00000803u);
  put_be32(img, static_cast<std::uint32_t>(n));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const double v = std::clamp(data.inputs[i], 0.0, 1.0);
    const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!img) throw IoError("write failed for " + images_path);

  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw IoError("cannot write " + labels_path);
  put_be32(lab, 0x00000801u);
  put_be32(lab, static_cast<std::uint32_t>(n));
  for (std::size_t l : data.labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!lab) throw IoError("write failed for " + labels_path);
}

LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("load_cifar10_binary: no files given");
  constexpr std::size_t kRecord = 3073;  // 1 label byte + 3*32*32 pixels
  constexpr std::size_t kPixels = 3072;

  std::size_t total = 0;
  std::vector<std::vector<unsigned char>> files;
  for (const std::string& path : paths) {
    files.push_back(read_file(path));
    if (files.back().empty() || files.back().size() % kRecord != 0) {
      throw FormatError(path + ": size " + std::to_string(files.back().size()) +
                        " is not a positive multiple of " + std::to_string(kRecord));
    }
    total += files.back().size() / kRecord;
  }

  LabeledDataset out;
  out.classes = 10;
  out.inputs = Tensor({total, 3, 32, 32});
  out.labels.reserve(total);
  std::size_t row = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const std::vector<unsigned char>& bytes = files[f];
    for (std::size_t r = 0; r < bytes.size() / kRecord; ++r, ++row) {
      const unsigned char label = bytes[r * kRecord];
      if (label > 9) {
        throw DataError(paths[f] + ": record " + std::to_string(r) + " has label " +
                        std::to_string(int(label)) + " (valid: 0..9)");
      }
      out.labels.push_back(label);
      const unsigned char* px = bytes.data() + r * kRecord + 1;
      double* dst = out.inputs.values().data() + row * kPixels;
      for (std::size_t i = 0; i < kPixels; ++i) {
        dst[i] = static_cast<double>(px[i]) / 255.0;
      }
    }
  }
  return out;
}

HumanLabelSet load_human_csv(const std::string& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  struct Row {
    std::size_t index;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // tolerate blank lines and trailing newline
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != classes + 1) {
      throw FormatError(path + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " columns, expected " +
                        std::to_string(classes + 1));
    }

    auto parse = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw FormatError(path + ": row " + std::to_string(line_no) + ": '" + s +
                          "' is not a number");
      }
      if (s.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw FormatError(path + ": row " + std::to_string(line_no) + ": '" + s +
                          "' is not a number");
      }
      return v;
    };

    Row row;
    const double raw_index = parse(fields[0]);
    if (raw_index < 0 || raw_index != std::floor(raw_index)) {
      throw FormatError(path + ": row " + std::to_string(line_no) +
                        ": stimulus index must be a non-negative integer");
    }
    row.index = static_cast<std::size_t>(raw_index);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double v = parse(fields[c + 1]);
      if (v < 0) {
        throw FormatError(path + ": row " + std::to_string(line_no) +
                          ": negative value " + fields[c + 1]);
      }
      row.values.push_back(v);
      sum += v;
    }
    if (sum > 1.0 + 1e-6) {
      for (double& v : row.values) v /= sum;  // counts
    } else if (std::abs(sum - 1.0) > 1e-6) {
      throw FormatError(path + ": row " + std::to_string(line_no) + " sums to " +
                        std::to_string(sum) + ", expected 1 or subject counts");
    }
    for (const Row& seen : rows) {
      if (seen.index == row.index) {
        throw FormatError(path + ": row " + std::to_string(line_no) +
                          ": duplicate stimulus index " + std::to_string(row.index));
      }
    }
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.index < b.index; });

  HumanLabelSet out;
  out.probs = Tensor({rows.size(), classes});
  out.indices.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.indices.push_back(rows[i].index);
    for (std::size_t c = 0; c < classes; ++c) {
      out.probs[i * classes + c] = rows[i].values[c];
    }
  }
  return out;
}

Tensor take_rows(const Tensor& inputs, const std::vector<std::size_t>& rows) {
  if (inputs.rank() < 1) throw DimensionError("take_rows needs a leading axis");
  const std::size_t n = inputs.shape()[0];
  std::size_t row_size = 1;
  for (std::size_t d = 1; d < inputs.rank(); ++d) row_size *= inputs.shape()[d];
  Shape out_shape = inputs.shape();
  out_shape[0] = rows.size();
  Tensor out(out_shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw DimensionError("take_rows: row " + std::to_string(rows[i]) +
                           " out of range for " + shape_str(inputs.shape()));
    }
    std::memcpy(out.values().data() + i * row_size,
                inputs.values().data() + rows[i] * row_size, row_size * sizeof(double));
  }
  return out;
}

SplitResult split(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw ConfigError("split: fraction must lie strictly between 0 and 1");
  }
  std::vector<std::vector<std::size_t>> per_class(data.classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] >= data.classes) {
      throw DataError("split: label " + std::to_string(data.labels[i]) +
                      " out of range for " + std::to_string(data.classes) + " classes");
    }
    per_class[data.labels[i]].push_back(i);
  }

  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t c = 0; c < data.classes; ++c) {
    std::vector<std::size_t>& members = per_class[c];
    if (members.size() < 2) {
      throw DataError("split: class " + std::to_string(c) + " has " +
                      std::to_string(members.size()) + " examples, need at least 2");
    }
    std::mt19937_64 rng(seed + c);
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t take = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    train_rows.insert(train_rows.end(), members.begin(), members.begin() + take);
    val_rows.insert(val_rows.end(), members.begin() + take, members.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  SplitResult out;
  out.train.inputs = take_rows(data.inputs, train_rows);
  out.validation.inputs = take_rows(data.inputs, val_rows);
  out.train.classes = out.validation.classes = data.classes;
  for (std::size_t r : train_rows) out.train.labels.push_back(data.labels[r]);
  for (std::size_t r : val_rows) out.validation.labels.push_back(data.labels[r]);
  return out;
}

}  // namespace dcm
