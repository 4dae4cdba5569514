#include "fedaudit/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedaudit/rng.hpp"

namespace fedaudit {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& s : samples)
    if (s.label < num_classes) ++counts[s.label];
  return counts;
}

void Dataset::validate() const {
  const std::size_t l = length();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.features.size() != l)
      throw std::invalid_argument("sample " + std::to_string(i) + " has length " +
                                  std::to_string(s.features.size()) + ", expected " + std::to_string(l));
    if (s.label >= num_classes)
      throw std::invalid_argument("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                                  " >= num_classes " + std::to_string(num_classes));
    for (double v : s.features)
      if (!std::isfinite(v)) throw std::invalid_argument("sample " + std::to_string(i) + " has a non-finite feature");
  }
}

double feature_stddev(const Dataset& ds) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : ds.samples)
    for (double v : s.features) {
      sum += v;
      sq += v * v;
      ++n;
    }
  if (n < 2) return 0.0;
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

Dataset synth_dataset(std::size_t num_classes, std::size_t samples_per_class, std::size_t length,
                      double noise_std, std::uint64_t seed) {
  if (num_classes == 0 || samples_per_class == 0 || length == 0)
    throw std::invalid_argument("synth_dataset: counts must be positive");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("synth_dataset: noise_std must be non-negative");

  Dataset ds;
  ds.num_classes = num_classes;
  ds.samples.reserve(num_classes * samples_per_class);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double cycles = static_cast<double>(c + 1);
    const double phase = std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
    std::vector<double> base(length);
    for (std::size_t t = 0; t < length; ++t)
      base[t] = std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) / static_cast<double>(length) + phase);
    for (std::size_t i = 0; i < samples_per_class; ++i) {
      Sample s{base, c};
      if (noise_std > 0.0)
        for (auto& v : s.features) v += noise_std * noise(rng);
      ds.samples.push_back(std::move(s));
    }
  }
  std::shuffle(ds.samples.begin(), ds.samples.end(), rng);
  return ds;
}

SplitResult split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);

  Rng rng(seed);
  std::vector<bool> in_test(ds.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2)
      throw std::invalid_argument("split: class " + std::to_string(c) + " has fewer than 2 samples");
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    for (std::size_t k = 0; k < n_test; ++k) in_test[idx[k]] = true;
  }

  SplitResult out;
  out.train.num_classes = out.test.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < ds.size(); ++i) (in_test[i] ? out.test : out.train).samples.push_back(ds.samples[i]);
  return out;
}

double PartitionSpec::deficit(std::size_t client, std::size_t cls) const {
  auto it = deficits.find({client, cls});
  return it == deficits.end() ? 0.0 : it->second;
}

std::vector<Dataset> partition_non_iid(const Dataset& ds, const PartitionSpec& spec, std::uint64_t seed) {
  const std::size_t k_clients = spec.num_clients;
  if (k_clients == 0) throw std::invalid_argument("partition: num_clients must be at least 1");
  for (const auto& [key, d] : spec.deficits) {
    if (key.first >= k_clients || key.second >= ds.num_classes)
      throw std::invalid_argument("partition: deficit for unknown client " + std::to_string(key.first) +
                                  " / class " + std::to_string(key.second));
    if (!(d >= 0.0 && d <= 0.9))
      throw std::invalid_argument("partition: deficit for client " + std::to_string(key.first) +
                                  " must lie in [0, 0.9]");
  }

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);

  Rng rng(seed);
  std::vector<Dataset> out(k_clients);
  std::vector<std::vector<std::size_t>> picked(k_clients);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t share = idx.size() / k_clients;
    for (std::size_t k = 0; k < k_clients; ++k) {
      const auto take =
          static_cast<std::size_t>(std::llround((1.0 - spec.deficit(k, c)) * static_cast<double>(share)));
      if (take == 0)
        throw std::invalid_argument("partition: client " + std::to_string(k) + " would receive no samples of class " +
                                    std::to_string(c));
      picked[k].insert(picked[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(k * share),
                       idx.begin() + static_cast<std::ptrdiff_t>(k * share + take));
    }
  }
  for (std::size_t k = 0; k < k_clients; ++k) {
    std::sort(picked[k].begin(), picked[k].end());
    out[k].num_classes = ds.num_classes;
    for (std::size_t i : picked[k]) out[k].samples.push_back(ds.samples[i]);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void csv_error(std::size_t line, const std::string& what) {
  throw std::invalid_argument("csv line " + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) csv_error(1, "missing header");
  ++line_no;
  const auto header = split_fields(line);
  if (header.size() < 2 || header.back() != "label") csv_error(1, "header must be f0,...,f{l-1},label");
  const std::size_t l = header.size() - 1;
  for (std::size_t i = 0; i < l; ++i)
    if (header[i] != "f" + std::to_string(i)) csv_error(1, "expected column f" + std::to_string(i));

  Dataset ds;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != l + 1)
      csv_error(line_no, "expected " + std::to_string(l + 1) + " fields, got " + std::to_string(fields.size()));
    Sample s;
    s.features.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
      const auto f = fields[i];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), s.features[i]);
      if (ec != std::errc() || ptr != f.data() + f.size()) csv_error(line_no, "bad number in column f" + std::to_string(i));
      if (!std::isfinite(s.features[i])) csv_error(line_no, "non-finite value in column f" + std::to_string(i));
    }
    const auto lf = fields[l];
    long long label = -1;
    auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || ptr != lf.data() + lf.size() || label < 0) csv_error(line_no, "bad label");
    s.label = static_cast<std::size_t>(label);
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  ds.num_classes = ds.samples.empty() ? 0 : max_label + 1;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string to_csv(const Dataset& ds) {
  std::string out;
  const std::size_t l = ds.length();
  for (std::size_t i = 0; i < l; ++i) out += "f" + std::to_string(i) + ",";
  out += "label\n";
  char buf[64];
  for (const auto& s : ds.samples) {
    for (double v : s.features) {
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, res.ptr);
      out += ',';
    }
    out += std::to_string(s.label);
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv(ds);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace fedaudit
