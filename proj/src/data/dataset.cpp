#include "ugpl/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ugpl/data/pgm.hpp"
#include "ugpl/numerics/rng.hpp"
#include "ugpl/patch_extraction.hpp"

namespace ugpl {
namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string summarize(const std::filesystem::path& dir, const std::vector<std::string>& problems) {
  std::string msg = "failed to load dataset " + dir.string() + " (" + std::to_string(problems.size()) + " problem" +
                    (problems.size() == 1 ? "" : "s") + ")";
  const std::size_t shown = std::min<std::size_t>(problems.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + problems[i];
  if (shown < problems.size()) msg += "\n  ... " + std::to_string(problems.size() - shown) + " more";
  return msg;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + s + "' (expected train, val or test)");
}

const std::vector<std::size_t>& Dataset::indices(Split split) const {
  switch (split) {
    case Split::kTrain: return splits.train;
    case Split::kVal: return splits.val;
    case Split::kTest: return splits.test;
  }
  return splits.train;
}

SplitIndices stratified_split(const std::vector<std::size_t>& labels, std::size_t num_classes, std::uint64_t seed,
                              double train_fraction, double val_fraction) {
  if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw std::invalid_argument("stratified_split: fractions must be non-negative and sum to at most 1");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw std::invalid_argument("stratified_split: label out of range");
    by_class[labels[i]].push_back(i);
  }
  Rng rng(seed, "split");
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(members[i - 1], members[j]);
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t round = 0; order.size() < labels.size(); ++round) {
    for (const auto& members : by_class) {
      if (round < members.size()) order.push_back(members[round]);
    }
  }
  const double n = static_cast<double>(labels.size());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
  const auto n_val = std::min(static_cast<std::size_t>(std::llround(val_fraction * n)), labels.size() - n_train);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* part : {&out.train, &out.val, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

NormalizationStats compute_stats(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i : indices) {
    for (double v : samples.at(i).image.data()) sum += v;
    count += static_cast<double>(samples[i].image.size());
  }
  if (count == 0.0) return {};
  const double mean = sum / count;
  double sq = 0.0;
  for (std::size_t i : indices) {
    for (double v : samples[i].image.data()) sq += (v - mean) * (v - mean);
  }
  return {mean, std::max(std::sqrt(sq / count), 1e-8)};
}

Tensor normalize(const Tensor& image, const NormalizationStats& stats) {
  Tensor out = image;
  for (double& v : out.data()) v = (v - stats.mean) / stats.std;
  return out;
}

Dataset make_synthetic_dataset(const SyntheticConfig& config) {
  Dataset d;
  d.samples = synthesize_samples(config);
  d.class_names = synthetic_class_names();
  d.seed = config.seed;
  d.generator = config.to_json();
  std::vector<std::size_t> labels;
  for (const Sample& s : d.samples) labels.push_back(s.label);
  d.splits = stratified_split(labels, d.num_classes(), config.seed);
  d.stats = compute_stats(d.samples, d.splits.train);
  return d;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw std::runtime_error("cannot write " + (dir / "labels.csv").string());
  labels << "id,filename,label\n";
  for (const Sample& s : dataset.samples) {
    const std::string file = "images/" + s.id + ".pgm";
    write_pgm(dir / file, s.image);
    labels << s.id << ',' << file << ',' << s.label << '\n';
  }
  auto ids = [&](const std::vector<std::size_t>& idx) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i : idx) arr.push_back(dataset.samples[i].id);
    return arr;
  };
  nlohmann::json meta{{"class_names", dataset.class_names},
                      {"seed", dataset.seed},
                      {"generator", dataset.generator},
                      {"normalization", {{"mean", dataset.stats.mean}, {"std", dataset.stats.std}}},
                      {"splits", {{"train", ids(dataset.splits.train)}, {"val", ids(dataset.splits.val)}, {"test", ids(dataset.splits.test)}}}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

DatasetError::DatasetError(const std::filesystem::path& dir, std::vector<std::string> problems)
    : std::runtime_error(summarize(dir, problems)), problems_(std::move(problems)) {}

Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options) {
  namespace fs = std::filesystem;
  std::vector<std::string> problems;
  if (!fs::is_directory(dir)) throw DatasetError(dir, {"not a directory (0 samples found)"});

  Dataset d;
  nlohmann::json meta;
  if (fs::exists(dir / "meta.json")) {
    try {
      std::ifstream(dir / "meta.json") >> meta;
    } catch (const std::exception& e) {
      throw DatasetError(dir, {"meta.json: " + std::string(e.what())});
    }
    d.class_names = meta.value("class_names", std::vector<std::string>{});
    d.seed = meta.value("seed", std::uint64_t{0});
    d.generator = meta.value("generator", nlohmann::json());
  }

  std::ifstream labels(dir / "labels.csv");
  if (!labels) throw DatasetError(dir, {"labels.csv missing (0 samples found)"});
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  std::size_t max_label = 0;
  while (std::getline(labels, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (line_no == 1 && !cells.empty() && cells[0] == "id") continue;
    const std::string where = "labels.csv:" + std::to_string(line_no) + ": ";
    if (cells.size() != 3) {
      problems.push_back(where + "expected 3 columns (id,filename,label), got " + std::to_string(cells.size()));
      continue;
    }
    std::size_t label = 0;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(cells[2], &used);
      if (used != cells[2].size() || v < 0) throw std::invalid_argument("bad");
      label = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      problems.push_back(where + "label '" + cells[2] + "' is not a non-negative integer");
      continue;
    }
    if (!d.class_names.empty() && label >= d.class_names.size()) {
      problems.push_back(where + "label " + std::to_string(label) + " out of range for " +
                         std::to_string(d.class_names.size()) + " classes (" + cells[1] + ")");
      continue;
    }
    if (!seen.insert(cells[0]).second) {
      problems.push_back(where + "duplicate id '" + cells[0] + "'");
      continue;
    }
    try {
      Tensor img = read_pgm(dir / cells[1]);
      const std::size_t h = options.height.value_or(img.dim(0));
      const std::size_t w = options.width.value_or(img.dim(1));
      img = (h == img.dim(0) && w == img.dim(1)) ? img.reshaped(Shape{h, w, 1}) : resize_bilinear(img, h, w);
      if (!d.samples.empty() && img.shape() != d.samples.front().image.shape()) {
        problems.push_back(where + cells[1] + ": size " + shape_str(img.shape()) + " differs from " +
                           shape_str(d.samples.front().image.shape()));
        continue;
      }
      max_label = std::max(max_label, label);
      d.samples.push_back({std::move(img), label, cells[0]});
    } catch (const std::exception& e) {
      problems.push_back(where + "cannot read image '" + cells[1] + "': " + e.what());
    }
  }
  if (d.samples.empty() && problems.empty()) problems.push_back("0 samples found");
  if (!problems.empty()) throw DatasetError(dir, std::move(problems));

  if (d.class_names.empty()) {
    for (std::size_t c = 0; c <= max_label; ++c) d.class_names.push_back("class_" + std::to_string(c));
  }

  if (meta.contains("splits")) {
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < d.samples.size(); ++i) by_id[d.samples[i].id] = i;
    std::set<std::string> assigned;
    for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
      auto& target = split == Split::kTrain ? d.splits.train : split == Split::kVal ? d.splits.val : d.splits.test;
      for (const auto& id : meta["splits"].value(to_string(split), std::vector<std::string>{})) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
          problems.push_back("meta.json: split '" + to_string(split) + "' names unknown id '" + id + "'");
        } else if (!assigned.insert(id).second) {
          problems.push_back("meta.json: id '" + id + "' appears in more than one split");
        } else {
          target.push_back(it->second);
        }
      }
      std::sort(target.begin(), target.end());
    }
    if (!problems.empty()) throw DatasetError(dir, std::move(problems));
  } else {
    std::vector<std::size_t> labels_only;
    for (const Sample& s : d.samples) labels_only.push_back(s.label);
    d.splits = stratified_split(labels_only, d.num_classes(), d.seed);
  }
  d.stats = compute_stats(d.samples, d.splits.train);
  return d;
}

}  // namespace ugpl
