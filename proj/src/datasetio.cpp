#include "gpc/datasetio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

#include "gpc/error.hpp"

namespace gpc {

std::vector<std::size_t> FeatureDataset::labelled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FeatureDataset::unlabelled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) out.push_back(i);
  }
  return out;
}

void FeatureDataset::validate() const {
  if (x.rows() < 1 || x.cols() < 1) throw Error(ErrorKind::DimMismatch, "dataset: need N >= 1 and d >= 1");
  if (labels.size() != size() || ids.size() != size()) {
    throw Error(ErrorKind::DimMismatch, "dataset: labels/ids do not match the number of rows");
  }
  std::set<std::int64_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw Error(ErrorKind::Parse, "dataset: instance ids are not unique");
  if (!x.allFinite()) throw Error(ErrorKind::Parse, "dataset: non-finite feature value");
  for (const auto& l : labels) {
    if (l && !std::binary_search(partition.old_classes.begin(), partition.old_classes.end(), *l)) {
      throw Error(ErrorKind::Parse, "dataset: labelled class " + std::to_string(*l) + " is not an old class");
    }
  }
}

FileFormat format_from_path(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".csv")) return FileFormat::Csv;
  if (ends_with(".gpcf")) return FileFormat::Gpcf;
  throw Error(ErrorKind::Config, "cannot infer format of '" + path + "' (expected .csv or .gpcf)");
}

std::string truth_path(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ".truth";
  return path.substr(0, dot) + ".truth" + path.substr(dot);
}

namespace {

void derive_partition(FeatureDataset& ds) {
  std::set<ClassId> old;
  for (const auto& l : ds.labels) {
    if (l) old.insert(*l);
  }
  ds.partition.old_classes.assign(old.begin(), old.end());
  ds.partition.new_classes.clear();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    std::ostringstream msg;
    msg << "line " << line << ": cannot parse " << what << " '" << field << "'";
    throw Error(ErrorKind::Parse, msg.str());
  }
  return value;
}

FeatureDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: missing header");
  const auto header = split_fields(trim(line));
  if (header.size() < 3 || trim(header[0]) != "id" || trim(header[1]) != "label") {
    throw Error(ErrorKind::Parse, "line 1: header must be id,label,f0,...");
  }
  const std::size_t d = header.size() - 2;
  std::vector<double> values;
  FeatureDataset ds;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split_fields(body);
    if (fields.size() != d + 2) {
      std::ostringstream msg;
      msg << "line " << lineno << ": expected " << d + 2 << " fields, found " << fields.size();
      throw Error(ErrorKind::DimMismatch, msg.str());
    }
    ds.ids.push_back(parse_number<std::int64_t>(fields[0], lineno, "id"));
    const auto label = trim(fields[1]);
    if (label.empty()) ds.labels.emplace_back();
    else ds.labels.emplace_back(parse_number<ClassId>(label, lineno, "label"));
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_number<double>(fields[j + 2], lineno, "feature"));
  }
  const auto n = static_cast<Eigen::Index>(ds.ids.size());
  ds.x.resize(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      ds.x(i, j) = values[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j)];
    }
  }
  derive_partition(ds);
  ds.validate();
  return ds;
}

void save_csv(const FeatureDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << "id,label";
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.ids[i] << ',';
    if (ds.labels[i]) out << *ds.labels[i];
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x(static_cast<Eigen::Index>(i), j));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

template <class T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::int64_t, T>>;
  U bits;
  if constexpr (std::is_floating_point_v<T>) bits = std::bit_cast<std::uint64_t>(value);
  else bits = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <class U>
U get_le(const std::string& in, std::size_t& offset) {
  if (offset + sizeof(U) > in.size()) {
    throw Error(ErrorKind::Parse, "GPCF: truncated at offset " + std::to_string(offset));
  }
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    bits |= static_cast<U>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  }
  offset += sizeof(U);
  return bits;
}

}  // namespace

std::string encode_gpcf(const FeatureDataset& ds) {
  std::string out = "GPCF";
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint64_t>(out, ds.size());
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(ds.dim()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) put_le<double>(out, ds.x(static_cast<Eigen::Index>(i), j));
  }
  for (const auto& l : ds.labels) put_le<std::int64_t>(out, l ? *l : -1);
  return out;
}

FeatureDataset decode_gpcf(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "GPCF") != 0) {
    throw Error(ErrorKind::Parse, "GPCF: bad magic at offset 0");
  }
  std::size_t offset = 4;
  const auto version = get_le<std::uint32_t>(bytes, offset);
  if (version != 1) throw Error(ErrorKind::Parse, "GPCF: unsupported version " + std::to_string(version) + " at offset 4");
  const auto n = get_le<std::uint64_t>(bytes, offset);
  const auto d = get_le<std::uint64_t>(bytes, offset);
  const std::size_t expected = offset + n * d * 8 + n * 8;
  if (n == 0 || d == 0 || bytes.size() != expected) {
    std::ostringstream msg;
    msg << "GPCF: header says N=" << n << " d=" << d << " but payload is " << bytes.size() - offset
        << " bytes at offset " << offset;
    throw Error(ErrorKind::Parse, msg.str());
  }
  FeatureDataset ds;
  ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j) {
      ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
    }
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto raw = static_cast<std::int64_t>(get_le<std::uint64_t>(bytes, offset));
    if (raw < -1) throw Error(ErrorKind::Parse, "GPCF: invalid label at offset " + std::to_string(offset - 8));
    ds.labels.push_back(raw == -1 ? std::nullopt : std::optional<ClassId>(raw));
    ds.ids.push_back(static_cast<std::int64_t>(i));
  }
  derive_partition(ds);
  ds.validate();
  return ds;
}

FeatureDataset load_features(const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv) return load_csv(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_gpcf(bytes);
}

FeatureDataset load_features(const std::string& path) { return load_features(path, format_from_path(path)); }

void save_features(const FeatureDataset& ds, const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv) {
    save_csv(ds, path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  const std::string bytes = encode_gpcf(ds);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

void save_features(const FeatureDataset& ds, const std::string& path) {
  save_features(ds, path, format_from_path(path));
}

FeatureDataset make_split(const FeatureDataset& full, double labelled_fraction, std::uint64_t seed) {
  if (labelled_fraction < 0.0 || labelled_fraction > 1.0) {
    throw Error(ErrorKind::Domain, "make_split: fraction must lie in [0, 1]");
  }
  FeatureDataset out = full;
  std::mt19937_64 rng(seed);
  for (const ClassId c : full.partition.old_classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < full.size(); ++i) {
      if (full.labels[i] && *full.labels[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto keep = static_cast<std::size_t>(std::floor(labelled_fraction * static_cast<double>(members.size())));
    for (std::size_t t = keep; t < members.size(); ++t) out.labels[members[t]].reset();
  }
  for (auto& l : out.labels) {
    if (l && !std::binary_search(full.partition.old_classes.begin(), full.partition.old_classes.end(), *l)) l.reset();
  }
  return out;
}

SyntheticData gen_synth(const SynthSpec& spec) {
  if (spec.k_true == 0 || spec.dim == 0 || spec.per_class == 0) {
    throw Error(ErrorKind::Domain, "gen_synth: k_true, dim and per_class must be positive");
  }
  if (spec.k_labelled > spec.k_true) throw Error(ErrorKind::Domain, "gen_synth: K^l exceeds K_true");
  if (spec.sigma < 0.0) throw Error(ErrorKind::Domain, "gen_synth: sigma must be >= 0");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, spec.center_scale);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto k = static_cast<Eigen::Index>(spec.k_true);
  SyntheticData out;
  out.centers.resize(k, d);
  const double min_dist = spec.min_separation * spec.sigma;
  for (Eigen::Index c = 0; c < k; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      for (Eigen::Index j = 0; j < d; ++j) out.centers(c, j) = unif(rng);
      placed = true;
      for (Eigen::Index o = 0; o < c; ++o) {
        if ((out.centers.row(o) - out.centers.row(c)).norm() < min_dist) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) throw Error(ErrorKind::Domain, "gen_synth: cannot place centres at the requested separation");
  }

  const std::size_t n = spec.k_true * spec.per_class;
  Matrix x(static_cast<Eigen::Index>(n), d);
  FeatureDataset full;
  for (std::size_t c = 0; c < spec.k_true; ++c) {
    for (std::size_t t = 0; t < spec.per_class; ++t) {
      const auto row = static_cast<Eigen::Index>(c * spec.per_class + t);
      for (Eigen::Index j = 0; j < d; ++j) {
        x(row, j) = out.centers(static_cast<Eigen::Index>(c), j) + spec.sigma * gauss(rng);
      }
      full.labels.emplace_back(static_cast<ClassId>(c));
      out.truth.push_back(static_cast<ClassId>(c));
    }
  }
  if (spec.ambient_dim > spec.dim) {
    const auto amb = static_cast<Eigen::Index>(spec.ambient_dim);
    Matrix g(amb, d);
    for (Eigen::Index i = 0; i < amb; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) g(i, j) = gauss(rng);
    }
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(amb, d);
    Matrix lifted = x * q.transpose();
    for (Eigen::Index i = 0; i < lifted.rows(); ++i) {
      for (Eigen::Index j = 0; j < amb; ++j) lifted(i, j) += spec.ambient_noise * gauss(rng);
    }
    x = std::move(lifted);
  }
  full.x = std::move(x);
  for (std::size_t i = 0; i < n; ++i) full.ids.push_back(static_cast<std::int64_t>(i));
  for (std::size_t c = 0; c < spec.k_true; ++c) {
    (c < spec.k_labelled ? full.partition.old_classes : full.partition.new_classes).push_back(static_cast<ClassId>(c));
  }
  out.dataset = make_split(full, spec.labelled_fraction, rng());
  return out;
}

FeatureDataset partial_overlap_split(const FeatureDataset& split, std::span<const ClassId> truth,
                                     std::size_t overlap) {
  const auto& old = split.partition.old_classes;
  if (overlap > old.size()) {
    throw Error(ErrorKind::OverlapTooLarge, "partial_overlap_split: overlap exceeds the number of old classes");
  }
  if (truth.size() != split.size()) throw Error(ErrorKind::DimMismatch, "partial_overlap_split: truth size mismatch");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split.labels[i]) {
      keep.push_back(i);
      continue;
    }
    const auto pos = std::lower_bound(old.begin(), old.end(), truth[i]);
    const bool is_old = pos != old.end() && *pos == truth[i];
    if (!is_old || static_cast<std::size_t>(pos - old.begin()) < overlap) keep.push_back(i);
  }
  FeatureDataset out;
  out.partition = split.partition;
  out.x.resize(static_cast<Eigen::Index>(keep.size()), split.dim());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = split.x.row(static_cast<Eigen::Index>(keep[r]));
    out.labels.push_back(split.labels[keep[r]]);
    out.ids.push_back(split.ids[keep[r]]);
  }
  return out;
}

FeatureDataset with_truth(const FeatureDataset& ds, std::span<const ClassId> truth) {
  if (truth.size() != ds.size()) throw Error(ErrorKind::DimMismatch, "with_truth: size mismatch");
  FeatureDataset out = ds;
  for (std::size_t i = 0; i < truth.size(); ++i) out.labels[i] = truth[i];
  return out;
}

}  // namespace gpc
