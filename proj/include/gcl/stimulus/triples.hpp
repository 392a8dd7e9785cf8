#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "gcl/core/error.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/stimulus/spec.hpp"

namespace gcl::stimulus {

/// A matched (complete, aligned, disordered) trio. Indices refer to
/// positions in enumerate_specs().
struct Triple {
  std::size_t index = 0;
  StimulusSpec complete;
  StimulusSpec aligned;
  StimulusSpec disordered;
  int edge_length = 0;
  std::size_t complete_index = 0;
  std::size_t aligned_index = 0;
  std::size_t disordered_index = 0;
};

struct TripleOptions {
  /// Also require the complete image to sit at a different position than the
  /// fragments (the default only requires a different theta_global).
  bool strict_position = false;
  /// Shuffle-and-repair attempts before giving up.
  int max_restarts = 64;
};

inline bool admissible(const StimulusSpec& complete, const StimulusSpec& fragment,
                       const TripleOptions& opt) {
  if (complete.background != fragment.background) return false;
  if (complete.theta_global == fragment.theta_global) return false;
  if (opt.strict_position && complete.position == fragment.position) return false;
  return true;
}

/// Checks every pairing constraint of a triple; returns an empty string when
/// the triple is valid, otherwise the first violated constraint.
inline std::string triple_violation(const Triple& t, const TripleOptions& opt = {}) {
  const auto& a = t.aligned;
  const auto& d = t.disordered;
  const auto& c = t.complete;
  if (c.condition != Condition::Complete || a.condition != Condition::Aligned ||
      d.condition != Condition::Disordered)
    return "member conditions";
  if (a.theta_global != d.theta_global) return "aligned/disordered theta_global";
  if (a.position != d.position) return "aligned/disordered position";
  if (a.edge_length != d.edge_length || a.edge_length != t.edge_length) return "edge_length";
  if (c.theta_global == a.theta_global) return "complete shares theta_global";
  if (c.background != a.background || a.background != d.background) return "background";
  if (opt.strict_position && c.position == a.position) return "complete shares position";
  return {};
}

/// Pairs each of the 768 disordered specs with its matched aligned spec (same
/// background, position, theta_global and edge_length, hence used exactly 4
/// times) and a seeded random complete spec satisfying the pairing
/// constraints, with every complete spec used exactly 24 times.
///
/// Complete specs are dealt from a shuffled quota pool, then conflicts are
/// repaired by random admissible swaps; an unrepairable deal restarts with a
/// fresh sub-seed, up to max_restarts times.
inline std::vector<Triple> build_triples(std::uint64_t seed, const TripleOptions& opt = {}) {
  const auto specs = enumerate_specs();
  std::vector<Triple> triples;
  triples.reserve(kDisorderedCount);
  for (std::size_t i = kCompleteCount + kAlignedCount; i < specs.size(); ++i) {
    Triple t;
    t.index = triples.size();
    t.disordered = specs[i];
    t.disordered_index = i;
    t.aligned = specs[i];
    t.aligned.condition = Condition::Aligned;
    t.aligned.theta_local.reset();
    t.aligned_index = canonical_index(t.aligned);
    t.edge_length = *t.disordered.edge_length;
    triples.push_back(t);
  }

  for (auto bg : kBackgrounds) {
    std::vector<std::size_t> members;
    for (const auto& t : triples)
      if (t.disordered.background == bg) members.push_back(t.index);
    std::vector<std::size_t> completes;
    for (std::size_t i = 0; i < kCompleteCount; ++i)
      if (specs[i].background == bg) completes.push_back(i);
    if (members.size() % completes.size() != 0)
      throw Error("build_triples: quota is not integral");
    const std::size_t quota = members.size() / completes.size();

    bool done = false;
    for (int attempt = 0; attempt < opt.max_restarts && !done; ++attempt) {
      Engine eng = make_engine(derive_seed(seed, {static_cast<std::uint64_t>(bg), 
                                                  static_cast<std::uint64_t>(attempt)}));
      std::vector<std::size_t> pool;
      pool.reserve(members.size());
      for (auto c : completes) pool.insert(pool.end(), quota, c);
      shuffle(pool, eng);

      auto ok = [&](std::size_t slot, std::size_t complete) {
        return admissible(specs[complete], triples[members[slot]].aligned, opt);
      };
      done = true;
      for (std::size_t i = 0; i < pool.size() && done; ++i) {
        if (ok(i, pool[i])) continue;
        std::vector<std::size_t> partners;
        for (std::size_t j = 0; j < pool.size(); ++j)
          if (j != i && ok(i, pool[j]) && ok(j, pool[i])) partners.push_back(j);
        if (partners.empty()) {
          done = false;
          break;
        }
        std::swap(pool[i], pool[partners[uniform_index(eng, partners.size())]]);
      }
      if (!done) continue;
      for (std::size_t i = 0; i < members.size(); ++i) {
        auto& t = triples[members[i]];
        t.complete_index = pool[i];
        t.complete = specs[pool[i]];
      }
    }
    if (!done)
      throw Error("build_triples: no quota-satisfying assignment after " +
                  std::to_string(opt.max_restarts) + " attempts");
  }
  return triples;
}

/// How often each spec index is used as the given member type.
inline std::map<std::size_t, int> usage_counts(const std::vector<Triple>& triples, Condition which) {
  std::map<std::size_t, int> counts;
  for (const auto& t : triples) {
    switch (which) {
      case Condition::Complete: ++counts[t.complete_index]; break;
      case Condition::Aligned: ++counts[t.aligned_index]; break;
      case Condition::Disordered: ++counts[t.disordered_index]; break;
    }
  }
  return counts;
}

}  // namespace gcl::stimulus
