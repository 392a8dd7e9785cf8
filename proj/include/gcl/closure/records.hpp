#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gcl/closure/cosine.hpp"
#include "gcl/core/error.hpp"
#include "gcl/nn/network.hpp"
#include "gcl/stimulus/render.hpp"
#include "gcl/stimulus/triples.hpp"
#include "gcl/training/trainer.hpp"

namespace gcl::closure {

/// Flattened activation of one layer for one stimulus.
struct Embedding {
  std::vector<double> values;
  std::string layer;
  std::size_t spec_index = 0;  ///< position in stimulus::enumerate_specs()
  std::string model_id;
};

struct ClosureRecord {
  std::string model_id;
  std::string layer;
  std::size_t triple_index = 0;
  int edge_length = 0;
  double s_ac = 0.0;
  double s_dc = 0.0;
  double c = 0.0;
  /// A zero-norm embedding met a nonzero one in either similarity.
  bool zero_norm = false;
};

/// Closure values lie in [-2, 2]; outside [-1, 1] only happens when a
/// similarity is negative, so it is reported but kept.
inline bool outside_unit_range(const ClosureRecord& r) { return r.c < -1.0 || r.c > 1.0; }

inline ClosureRecord make_record(const stimulus::Triple& t, Similarity ac, Similarity dc,
                                 const std::string& layer, const std::string& model_id) {
  ClosureRecord r;
  r.model_id = model_id;
  r.layer = layer;
  r.triple_index = t.index;
  r.edge_length = t.edge_length;
  r.s_ac = ac.value;
  r.s_dc = dc.value;
  r.c = ac.value - dc.value;
  r.zero_norm = ac.one_zero_norm || dc.one_zero_norm;
  return r;
}

/// Records every spec's activation at the named layers. Output is
/// spec-major, layer-minor.
template <class T>
std::vector<Embedding> embed_stimuli(nn::Network<T>& net, const std::vector<std::string>& layers,
                                     const std::vector<stimulus::StimulusSpec>& specs,
                                     const std::string& model_id,
                                     const stimulus::RenderOptions& render_opt = {},
                                     std::size_t batch_size = 32) {
  const std::set<std::string> record(layers.begin(), layers.end());
  std::vector<Embedding> out;
  out.reserve(specs.size() * layers.size());
  for (std::size_t start = 0; start < specs.size(); start += batch_size) {
    const std::size_t end = std::min(specs.size(), start + batch_size);
    std::vector<Image> imgs;
    std::vector<const Image*> ptrs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(stimulus::render(specs[i], render_opt));
    for (const auto& im : imgs) ptrs.push_back(&im);
    const auto fwd = net.forward(training::make_batch<T>(ptrs), record);
    for (std::size_t i = start; i < end; ++i)
      for (const auto& name : layers) {
        const auto row = fwd.activations.at(name).row(i - start);
        Embedding e;
        e.values.assign(row.begin(), row.end());
        e.layer = name;
        e.spec_index = stimulus::canonical_index(specs[i]);
        e.model_id = model_id;
        out.push_back(std::move(e));
      }
  }
  net.release();
  return out;
}

/// One record per triple from precomputed embeddings of the given layer.
inline std::vector<ClosureRecord> closure_per_triple(const std::vector<Embedding>& embeddings,
                                                     const std::vector<stimulus::Triple>& triples,
                                                     const std::string& layer) {
  std::map<std::size_t, const Embedding*> by_spec;
  std::string model_id;
  for (const auto& e : embeddings)
    if (e.layer == layer) {
      by_spec[e.spec_index] = &e;
      model_id = e.model_id;
    }
  auto find = [&](std::size_t spec, std::size_t triple) -> const std::vector<double>& {
    auto it = by_spec.find(spec);
    if (it == by_spec.end())
      throw Error("closure: no '" + layer + "' embedding for spec " + std::to_string(spec) +
                  " (triple " + std::to_string(triple) + ")");
    return it->second->values;
  };
  std::vector<ClosureRecord> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    const auto& c = find(t.complete_index, t.index);
    const auto& a = find(t.aligned_index, t.index);
    const auto& d = find(t.disordered_index, t.index);
    out.push_back(make_record(t, cosine_similarity<double, double>(a, c),
                              cosine_similarity<double, double>(d, c), layer, model_id));
  }
  return out;
}

/// Closure records for the given triples at several layers in one pass over
/// the stimuli. Only complete-image activations are held in memory; aligned
/// and disordered images are reduced to their similarities batch by batch,
/// which keeps large early-layer maps affordable.
///
/// Output is layer-major (in the order given), then in the order of
/// `triples`.
template <class T>
std::vector<ClosureRecord> closure_records(nn::Network<T>& net,
                                           const std::vector<stimulus::Triple>& triples,
                                           const std::vector<std::string>& layers,
                                           const std::string& model_id,
                                           const stimulus::RenderOptions& render_opt = {},
                                           std::size_t batch_size = 32) {
  if (triples.empty()) throw Error("closure: no triples");
  if (layers.empty()) throw Error("closure: no layers requested");
  const std::set<std::string> record(layers.begin(), layers.end());
  if (record.size() != layers.size()) throw Error("closure: duplicate layer names");
  const auto specs = stimulus::enumerate_specs();
  const std::size_t nl = layers.size();

  auto run = [&](const std::vector<std::size_t>& spec_indices, auto&& consume) {
    for (std::size_t start = 0; start < spec_indices.size(); start += batch_size) {
      const std::size_t end = std::min(spec_indices.size(), start + batch_size);
      std::vector<Image> imgs;
      std::vector<const Image*> ptrs;
      for (std::size_t i = start; i < end; ++i)
        imgs.push_back(stimulus::render(specs.at(spec_indices[i]), render_opt));
      for (const auto& im : imgs) ptrs.push_back(&im);
      const auto fwd = net.forward(training::make_batch<T>(ptrs), record);
      for (std::size_t i = start; i < end; ++i) consume(spec_indices[i], fwd, i - start);
    }
  };

  // Complete embeddings, kept.
  std::set<std::size_t> complete_set, aligned_set, disordered_set;
  std::map<std::size_t, std::vector<std::size_t>> users_a, users_d;
  for (std::size_t k = 0; k < triples.size(); ++k) {
    complete_set.insert(triples[k].complete_index);
    users_a[triples[k].aligned_index].push_back(k);
    users_d[triples[k].disordered_index].push_back(k);
  }
  std::map<std::size_t, std::vector<std::vector<T>>> complete;
  run({complete_set.begin(), complete_set.end()},
      [&](std::size_t spec, const nn::ForwardOutput<T>& fwd, std::size_t row) {
        auto& per_layer = complete[spec];
        for (const auto& name : layers) {
          const auto r = fwd.activations.at(name).row(row);
          per_layer.emplace_back(r.begin(), r.end());
        }
      });

  std::vector<Similarity> s_ac(triples.size() * nl), s_dc(triples.size() * nl);
  auto reduce = [&](std::map<std::size_t, std::vector<std::size_t>>& users, std::vector<Similarity>& dst) {
    std::vector<std::size_t> order;
    for (const auto& [spec, _] : users) order.push_back(spec);
    run(order, [&](std::size_t spec, const nn::ForwardOutput<T>& fwd, std::size_t row) {
      for (std::size_t l = 0; l < nl; ++l) {
        const auto x = fwd.activations.at(layers[l]).row(row);
        for (std::size_t k : users.at(spec)) {
          const auto& c = complete.at(triples[k].complete_index)[l];
          dst[k * nl + l] = cosine_similarity(std::span<const T>(x), std::span<const T>(c));
        }
      }
    });
  };
  reduce(users_a, s_ac);
  reduce(users_d, s_dc);
  net.release();

  std::vector<ClosureRecord> out;
  out.reserve(triples.size() * nl);
  std::size_t flagged = 0;
  for (std::size_t l = 0; l < nl; ++l)
    for (std::size_t k = 0; k < triples.size(); ++k) {
      out.push_back(make_record(triples[k], s_ac[k * nl + l], s_dc[k * nl + l], layers[l], model_id));
      flagged += out.back().zero_norm;
    }
  if (flagged > 0)
    std::cerr << "warning: " << model_id << ": " << flagged
              << " closure records compare a zero embedding with a nonzero one\n";
  return out;
}

/// Triples restricted to the given indices, in that order.
inline std::vector<stimulus::Triple> select_triples(const std::vector<stimulus::Triple>& all,
                                                    const std::vector<std::size_t>& which) {
  std::vector<stimulus::Triple> out;
  out.reserve(which.size());
  for (auto i : which) out.push_back(all.at(i));
  return out;
}

}  // namespace gcl::closure
