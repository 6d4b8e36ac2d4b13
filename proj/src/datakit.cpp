#include "fedsim/datakit.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fedsim {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path, std::size_t& offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) {
    throw std::runtime_error("idx: truncated file " + path + " at offset " +
                             std::to_string(offset));
  }
  offset += 4;
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(buf), 4);
}

}  // namespace

LabelMap identity_map(int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("identity_map: num_classes must be >= 1");
  LabelMap m;
  m.to.resize(static_cast<std::size_t>(num_classes));
  std::iota(m.to.begin(), m.to.end(), 0);
  return m;
}

LabelMap decrement_map(int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("decrement_map: num_classes must be >= 2");
  LabelMap m;
  m.to.resize(static_cast<std::size_t>(num_classes));
  for (int l = 0; l < num_classes; ++l) {
    m.to[static_cast<std::size_t>(l)] = (l + num_classes - 1) % num_classes;
  }
  return m;
}

LabelMap inverse_map(const LabelMap& map) {
  LabelMap inv;
  inv.to.assign(map.to.size(), -1);
  for (int l = 0; l < map.num_classes(); ++l) {
    int t = map.to[static_cast<std::size_t>(l)];
    if (t < 0 || t >= map.num_classes() || inv.to[static_cast<std::size_t>(t)] != -1) {
      throw std::invalid_argument("inverse_map: map is not a bijection");
    }
    inv.to[static_cast<std::size_t>(t)] = l;
  }
  return inv;
}

RegressionData gen_regression(Eigen::Index n, int d, double noise_sigma, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("gen_regression: n and d must be >= 1");
  if (noise_sigma < 0.0) throw std::invalid_argument("gen_regression: noise_sigma must be >= 0");

  ParamVector truth(d + 1);
  for (int j = 0; j < d; ++j) truth[j] = rng.uniform(-1.0, 1.0);
  truth[d] = rng.uniform(-1.0, 1.0);

  RegressionData out;
  out.generating_params = truth;
  out.data.features.resize(n, d);
  out.data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.data.features(i, j) = rng.uniform();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double y = out.data.features.row(i).dot(truth.head(d)) + truth[d];
    out.data.labels[i] = y + noise_sigma * rng.normal();
  }
  return out;
}

Dataset gen_classification(Eigen::Index n, int d, int num_classes, double separation,
                           Rng& rng) {
  if (num_classes < 1) throw std::invalid_argument("gen_classification: num_classes must be >= 1");
  if (n < num_classes) throw std::invalid_argument("gen_classification: need n >= num_classes");
  if (d < 1) throw std::invalid_argument("gen_classification: d must be >= 1");

  // class centers on a base-k grid scaled by `separation`; distinct classes
  // differ in at least one digit, so centers are >= separation apart
  int base = 2;
  while (std::pow(static_cast<double>(base), d) < static_cast<double>(num_classes)) ++base;
  auto center_coord = [&](int label, int j) {
    int digit = label;
    for (int t = 0; t < j; ++t) digit /= base;
    return separation * static_cast<double>(digit % base);
  };

  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int label = static_cast<int>(i % num_classes);
    data.labels[i] = label;
    for (int j = 0; j < d; ++j) {
      data.features(i, j) = center_coord(label, j) + rng.normal();
    }
  }

  // min-max normalize each feature to [0,1]; degenerate columns become 0.5
  for (int j = 0; j < d; ++j) {
    double lo = data.features.col(j).minCoeff();
    double hi = data.features.col(j).maxCoeff();
    if (hi > lo) {
      data.features.col(j) = (data.features.col(j).array() - lo) / (hi - lo);
    } else {
      data.features.col(j).setConstant(0.5);
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);
  return take_rows(data, order);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::size_t img_off = 0;
  std::uint32_t magic = read_u32_be(img, images_path, img_off);
  if (magic != kImagesMagic) {
    std::ostringstream os;
    os << "idx: bad magic 0x" << std::hex << magic << " in " << images_path
       << " at offset 0 (expected 0x" << kImagesMagic << ")";
    throw std::runtime_error(os.str());
  }
  std::uint32_t n = read_u32_be(img, images_path, img_off);
  std::uint32_t rows = read_u32_be(img, images_path, img_off);
  std::uint32_t cols = read_u32_be(img, images_path, img_off);
  const std::size_t pixels = std::size_t(n) * rows * cols;
  std::vector<unsigned char> raw(pixels);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
  if (static_cast<std::size_t>(img.gcount()) != pixels) {
    throw std::runtime_error("idx: truncated file " + images_path + " at offset " +
                             std::to_string(img_off + static_cast<std::size_t>(img.gcount())));
  }

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
  std::size_t lab_off = 0;
  std::uint32_t lmagic = read_u32_be(lab, labels_path, lab_off);
  if (lmagic != kLabelsMagic) {
    std::ostringstream os;
    os << "idx: bad magic 0x" << std::hex << lmagic << " in " << labels_path
       << " at offset 0 (expected 0x" << kLabelsMagic << ")";
    throw std::runtime_error(os.str());
  }
  std::uint32_t ln = read_u32_be(lab, labels_path, lab_off);
  if (ln != n) {
    throw std::runtime_error("idx: count mismatch: " + images_path + " has " +
                             std::to_string(n) + " images, " + labels_path + " has " +
                             std::to_string(ln) + " labels");
  }
  std::vector<unsigned char> lraw(ln);
  lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(ln));
  if (static_cast<std::size_t>(lab.gcount()) != ln) {
    throw std::runtime_error("idx: truncated file " + labels_path + " at offset " +
                             std::to_string(lab_off + static_cast<std::size_t>(lab.gcount())));
  }

  Dataset data;
  const Eigen::Index dim = static_cast<Eigen::Index>(rows) * cols;
  data.features.resize(n, dim);
  data.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      data.features(i, j) = raw[std::size_t(i) * dim + std::size_t(j)] / 255.0;
    }
    data.labels[i] = lraw[i];
  }
  return data;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& data, int rows, int cols) {
  if (static_cast<Eigen::Index>(rows) * cols != data.features.cols()) {
    throw std::invalid_argument("write_idx: rows*cols must equal the feature dim");
  }
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path + " for writing");
  write_u32_be(img, kImagesMagic);
  write_u32_be(img, static_cast<std::uint32_t>(data.size()));
  write_u32_be(img, static_cast<std::uint32_t>(rows));
  write_u32_be(img, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      auto byte = static_cast<unsigned char>(
          std::min(255.0, std::max(0.0, data.features(i, j) * 255.0)) + 0.5);
      img.write(reinterpret_cast<char*>(&byte), 1);
    }
  }

  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path + " for writing");
  write_u32_be(lab, kLabelsMagic);
  write_u32_be(lab, static_cast<std::uint32_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    auto byte = static_cast<unsigned char>(data.label_at(i));
    lab.write(reinterpret_cast<char*>(&byte), 1);
  }
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: " + path + " has no header row");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  std::size_t num_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("csv: " + path + " line " + std::to_string(line_no) +
                                 ": cannot parse \"" + cell + "\" as a number");
      }
    }
    if (row.size() < 2) {
      throw std::runtime_error("csv: " + path + " line " + std::to_string(line_no) +
                               ": need at least one feature column and a target column");
    }
    if (num_cols == 0) num_cols = row.size();
    if (row.size() != num_cols) {
      throw std::runtime_error("csv: " + path + " line " + std::to_string(line_no) +
                               ": expected " + std::to_string(num_cols) + " columns, got " +
                               std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: " + path + " has no data rows");

  Dataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(num_cols - 1);
  data.features.resize(n, d);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = rows[i][j];
    data.labels[i] = rows[i][num_cols - 1];
  }
  return data;
}

Partition partition_noniid(const Dataset& data, int num_clients, double p,
                           int num_classes, Rng& rng) {
  if (num_clients < 1) throw std::invalid_argument("partition: num_clients must be >= 1");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("partition: p must lie in [0,1]");
  if (num_classes < 1) throw std::invalid_argument("partition: num_classes must be >= 1");
  if (num_classes > num_clients) {
    throw std::invalid_argument("partition: more class groups (" + std::to_string(num_classes) +
                                ") than clients (" + std::to_string(num_clients) + ")");
  }

  // home clients of class l: every client k with k mod num_classes == l
  std::vector<std::vector<int>> home(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_clients; ++k) {
    home[static_cast<std::size_t>(k % num_classes)].push_back(k);
  }

  Partition part;
  part.assignments.resize(static_cast<std::size_t>(num_clients));
  const Eigen::Index n = data.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    int l = data.label_at(i);
    if (l < 0 || l >= num_classes) {
      throw std::invalid_argument("partition: label " + std::to_string(l) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    }
    double u = rng.uniform();
    int client;
    if (u < p) {
      const auto& group = home[static_cast<std::size_t>(l)];
      client = group[rng.uniform_index(group.size())];
    } else {
      client = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(num_clients)));
    }
    part.assignments[static_cast<std::size_t>(client)].push_back(i);
  }

  part.weights.resize(static_cast<std::size_t>(num_clients));
  for (int k = 0; k < num_clients; ++k) {
    part.weights[static_cast<std::size_t>(k)] =
        static_cast<double>(part.assignments[static_cast<std::size_t>(k)].size()) /
        static_cast<double>(n);
  }
  return part;
}

Partition partition_uniform(const Dataset& data, int num_clients, Rng& rng) {
  if (num_clients < 1) throw std::invalid_argument("partition: num_clients must be >= 1");
  Partition part;
  part.assignments.resize(static_cast<std::size_t>(num_clients));
  const Eigen::Index n = data.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    auto client = rng.uniform_index(static_cast<std::size_t>(num_clients));
    part.assignments[client].push_back(i);
  }
  part.weights.resize(static_cast<std::size_t>(num_clients));
  for (int k = 0; k < num_clients; ++k) {
    part.weights[static_cast<std::size_t>(k)] =
        static_cast<double>(part.assignments[static_cast<std::size_t>(k)].size()) /
        static_cast<double>(n);
  }
  return part;
}

Dataset flip_labels(const Dataset& data, const LabelMap& map) {
  Dataset out;
  out.features = data.features;
  out.labels.resize(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out.labels[i] = map.apply(data.label_at(i));
  }
  return out;
}

Dataset to_parity_labels(const Dataset& data) {
  Dataset out;
  out.features = data.features;
  out.labels.resize(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    int l = data.label_at(i);
    if (l < 0) throw std::invalid_argument("to_parity_labels: negative class id");
    out.labels[i] = l % 2;
  }
  return out;
}

}  // namespace fedsim
