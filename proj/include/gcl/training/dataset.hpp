#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gcl/core/error.hpp"
#include "gcl/core/image.hpp"
#include "gcl/core/image_io.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/stimulus/render.hpp"
#include "gcl/stimulus/triples.hpp"

namespace gcl::training {

enum class Provenance { Natural, WhiteNoise, ShuffledPixels, ShuffledLabels, StimulusCD, StimulusBD };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Natural: return "natural";
    case Provenance::WhiteNoise: return "white_noise";
    case Provenance::ShuffledPixels: return "shuffled_pixels";
    case Provenance::ShuffledLabels: return "shuffled_labels";
    case Provenance::StimulusCD: return "stimulus_cd";
    case Provenance::StimulusBD: return "stimulus_bd";
  }
  return "?";
}

/// Labelled examples over a pool of distinct images. Several examples may
/// share one pooled image (stimulus sets reuse complete and aligned images
/// across triples).
struct Dataset {
  struct Item {
    std::size_t image = 0;
    int label = 0;
  };

  std::vector<Image> images;
  std::vector<Item> items;
  int label_arity = 0;
  Provenance provenance = Provenance::Natural;
  std::vector<std::string> class_names;
  std::optional<std::uint64_t> permutation_seed;
  std::optional<std::uint64_t> label_seed;
  /// Shuffled-pixel datasets: shuffled location q holds original location
  /// pixel_permutation[q].
  std::vector<std::size_t> pixel_permutation;

  std::size_t size() const { return items.size(); }
  const Image& image(std::size_t i) const { return images[items[i].image]; }
  int label(std::size_t i) const { return items[i].label; }

  std::vector<std::size_t> class_histogram() const {
    std::vector<std::size_t> h(static_cast<std::size_t>(std::max(label_arity, 0)), 0);
    for (const auto& it : items) ++h.at(static_cast<std::size_t>(it.label));
    return h;
  }
};

enum class BadFilePolicy { Fail, SkipWithWarning };

struct NaturalOptions {
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t image_size = 150;
  std::uint64_t seed = 0;
  BadFilePolicy bad_files = BadFilePolicy::Fail;
};

inline bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Loads root/<class>/*.{png,jpg}. When more classes (or files) exist than
/// requested, a seeded subset is taken; the kept classes and files stay in
/// sorted-name order.
inline Dataset load_natural(const std::filesystem::path& root, const NaturalOptions& opt) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError(root.string(), "not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < opt.classes)
    throw IoError(root.string(), "has " + std::to_string(class_dirs.size()) + " class directories, " +
                                     std::to_string(opt.classes) + " requested");
  Engine eng = make_engine(derive_seed(opt.seed, {0xC1A55}));
  auto pick_sorted = [&](std::vector<fs::path> xs, std::size_t k) {
    if (xs.size() > k) {
      shuffle(xs, eng);
      xs.resize(k);
      std::sort(xs.begin(), xs.end());
    }
    return xs;
  };
  class_dirs = pick_sorted(class_dirs, opt.classes);

  Dataset ds;
  ds.provenance = Provenance::Natural;
  ds.label_arity = static_cast<int>(opt.classes);
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    ds.class_names.push_back(class_dirs[c].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c]))
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (opt.bad_files == BadFilePolicy::Fail) {
      if (files.size() < opt.per_class)
        throw IoError(class_dirs[c].string(), "has " + std::to_string(files.size()) + " images, " +
                                                  std::to_string(opt.per_class) + " requested");
      files = pick_sorted(files, opt.per_class);
    } else {
      // Keep a seeded order so skipped files are replaced deterministically.
      std::vector<fs::path> order = files;
      shuffle(order, eng);
      files = std::move(order);
    }
    std::vector<std::pair<fs::path, Image>> loaded;
    for (const auto& f : files) {
      if (loaded.size() == opt.per_class) break;
      try {
        loaded.emplace_back(f, read_image(f, opt.image_size));
      } catch (const IoError& e) {
        if (opt.bad_files == BadFilePolicy::Fail) throw;
        std::cerr << "warning: skipping " << e.what() << '\n';
      }
    }
    if (loaded.size() < opt.per_class)
      throw IoError(class_dirs[c].string(), "only " + std::to_string(loaded.size()) +
                                                " decodable images, " + std::to_string(opt.per_class) +
                                                " requested");
    std::sort(loaded.begin(), loaded.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [path, img] : loaded) {
      ds.items.push_back({ds.images.size(), static_cast<int>(c)});
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

/// i.i.d. uniform [-1, +1] pixels with labels drawn uniformly from k classes.
inline Dataset make_white_noise(std::size_t count, std::size_t classes, std::uint64_t seed,
                                std::size_t image_size = 150, std::size_t channels = 3) {
  if (count == 0 || classes == 0) throw Error("make_white_noise: count and classes must be positive");
  Dataset ds;
  ds.provenance = Provenance::WhiteNoise;
  ds.label_arity = static_cast<int>(classes);
  ds.images.reserve(count);
  Engine eng = make_engine(derive_seed(seed, {0x401CE}));
  for (std::size_t i = 0; i < count; ++i) {
    Image img(image_size, image_size, channels);
    for (auto& v : img.values) v = static_cast<float>(uniform(eng, -1.0, 1.0));
    ds.items.push_back({i, static_cast<int>(uniform_index(eng, classes))});
    ds.images.push_back(std::move(img));
  }
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("noise_" + std::to_string(c));
  return ds;
}

/// Applies one seeded permutation of spatial locations to every image
/// (channels move together). per_image draws a fresh permutation for each
/// image instead.
inline Dataset shuffle_pixels(const Dataset& ds, std::uint64_t seed, bool per_image = false) {
  if (ds.images.empty()) return ds;
  const auto& first = ds.images.front();
  for (const auto& img : ds.images)
    if (!img.same_shape(first)) throw Error("shuffle_pixels: images differ in shape");
  Dataset out = ds;
  out.provenance = Provenance::ShuffledPixels;
  out.permutation_seed = seed;
  Engine eng = make_engine(derive_seed(seed, {0x5D1F7}));
  const std::size_t n = first.pixel_count(), ch = first.channels;
  std::vector<std::size_t> perm = random_permutation(n, eng);
  if (!per_image) out.pixel_permutation = perm;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    if (per_image && i > 0) perm = random_permutation(n, eng);
    const auto& src = ds.images[i].values;
    auto& dst = out.images[i].values;
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t c = 0; c < ch; ++c) dst[q * ch + c] = src[perm[q] * ch + c];
  }
  return out;
}

/// Inverse of a shared-permutation shuffle.
inline Dataset unshuffle_pixels(const Dataset& ds) {
  if (ds.pixel_permutation.empty()) throw Error("unshuffle_pixels: dataset has no stored permutation");
  Dataset out = ds;
  const auto& perm = ds.pixel_permutation;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const std::size_t ch = ds.images[i].channels;
    const auto& src = ds.images[i].values;
    auto& dst = out.images[i].values;
    for (std::size_t q = 0; q < perm.size(); ++q)
      for (std::size_t c = 0; c < ch; ++c) dst[perm[q] * ch + c] = src[q * ch + c];
  }
  out.pixel_permutation.clear();
  out.permutation_seed.reset();
  out.provenance = Provenance::Natural;
  return out;
}

/// Permutes the label column; images and the class histogram are unchanged.
inline Dataset shuffle_labels(const Dataset& ds, std::uint64_t seed) {
  if (ds.items.empty()) throw Error("shuffle_labels: empty dataset");
  Dataset out = ds;
  out.provenance = Provenance::ShuffledLabels;
  out.label_seed = seed;
  Engine eng = make_engine(derive_seed(seed, {0x1ABE1}));
  const auto perm = random_permutation(ds.items.size(), eng);
  for (std::size_t i = 0; i < perm.size(); ++i) out.items[i].label = ds.items[perm[i]].label;
  return out;
}

enum class StimulusTask { CD, BD };

inline std::string_view to_string(StimulusTask t) { return t == StimulusTask::CD ? "CD" : "BD"; }

/// Binary target of a stimulus under a sanity-check task. CD: complete and
/// aligned -> 1, disordered -> 0. BD: black background -> 1, white -> 0.
inline int stimulus_label(const stimulus::StimulusSpec& s, StimulusTask task) {
  if (task == StimulusTask::CD) return s.condition == stimulus::Condition::Disordered ? 0 : 1;
  return s.background == stimulus::Background::Black ? 1 : 0;
}

struct StimulusSplit {
  Dataset train;
  Dataset val;
  std::vector<std::size_t> train_triples;
  std::vector<std::size_t> val_triples;
};

/// Shuffles the triples with split_seed and keeps 75% of each edge length
/// for training, so validation cells stay balanced across edge lengths.
/// Each triple contributes its complete, aligned and disordered image with
/// task labels.
inline StimulusSplit make_cd_bd_sets(const std::vector<stimulus::Triple>& triples, StimulusTask task,
                                     std::uint64_t split_seed,
                                     const stimulus::RenderOptions& render_opt = {}) {
  if (triples.empty()) throw Error("make_cd_bd_sets: no triples");
  Engine eng = make_engine(derive_seed(split_seed, {0x5917}));
  const auto order = random_permutation(triples.size(), eng);
  std::map<int, std::size_t> per_edge, taken;
  for (const auto& t : triples) ++per_edge[t.edge_length];
  StimulusSplit split;
  for (auto k : order) {
    const int e = triples[k].edge_length;
    auto& dst = taken[e] < per_edge[e] * 3 / 4 ? split.train_triples : split.val_triples;
    if (&dst == &split.train_triples) ++taken[e];
    dst.push_back(k);
  }

  const auto prov = task == StimulusTask::CD ? Provenance::StimulusCD : Provenance::StimulusBD;
  auto build = [&](const std::vector<std::size_t>& which) {
    Dataset ds;
    ds.provenance = prov;
    ds.label_arity = 2;
    ds.class_names = {"0", "1"};
    std::map<std::size_t, std::size_t> pooled;
    auto add = [&](std::size_t spec_index, const stimulus::StimulusSpec& spec) {
      auto [it, fresh] = pooled.try_emplace(spec_index, ds.images.size());
      if (fresh) ds.images.push_back(stimulus::render(spec, render_opt));
      ds.items.push_back({it->second, stimulus_label(spec, task)});
    };
    for (auto t : which) {
      const auto& tr = triples.at(t);
      add(tr.complete_index, tr.complete);
      add(tr.aligned_index, tr.aligned);
      add(tr.disordered_index, tr.disordered);
    }
    return ds;
  };
  split.train = build(split.train_triples);
  split.val = build(split.val_triples);
  return split;
}

/// Seeded split of a dataset into train/validation, stratified by label.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double val_fraction,
                                                 std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw Error("val_fraction must be in [0, 1)");
  Engine eng = make_engine(derive_seed(seed, {0x5B117}));
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < ds.items.size(); ++i) by_label[ds.items[i].label].push_back(i);
  Dataset train = ds, val = ds;
  train.items.clear();
  val.items.clear();
  std::vector<std::size_t> tr_idx, va_idx;
  for (auto& [label, idx] : by_label) {
    shuffle(idx, eng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(idx.size())));
    va_idx.insert(va_idx.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
    tr_idx.insert(tr_idx.end(), idx.begin() + static_cast<long>(n_val), idx.end());
  }
  std::sort(tr_idx.begin(), tr_idx.end());
  std::sort(va_idx.begin(), va_idx.end());
  for (auto i : tr_idx) train.items.push_back(ds.items[i]);
  for (auto i : va_idx) val.items.push_back(ds.items[i]);
  return {std::move(train), std::move(val)};
}

}  // namespace gcl::training
