#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcl/core/error.hpp"

namespace gcl::stimulus {

enum class Condition { Complete, Aligned, Disordered };
enum class Background { Black, White };
enum class Position { Centered, Offset };

inline constexpr std::array<Condition, 3> kConditions{Condition::Complete, Condition::Aligned,
                                                      Condition::Disordered};
inline constexpr std::array<Background, 2> kBackgrounds{Background::Black, Background::White};
inline constexpr std::array<Position, 2> kPositions{Position::Centered, Position::Offset};
inline constexpr std::array<int, 8> kThetaGlobal{0, 15, 30, 45, 60, 75, 90, 105};
inline constexpr std::array<int, 6> kEdgeLengths{3, 8, 13, 18, 24, 29};
inline constexpr std::array<int, 4> kThetaLocal{72, 144, 216, 288};

inline constexpr int kImageSize = 150;
inline constexpr double kVertexDistance = 116.0;
/// Offset position moves the centroid by this many pixels in x and in y.
inline constexpr double kOffsetPixels = -8.0;

inline constexpr std::size_t kCompleteCount = 32;
inline constexpr std::size_t kAlignedCount = 192;
inline constexpr std::size_t kDisorderedCount = 768;
inline constexpr std::size_t kSpecCount = kCompleteCount + kAlignedCount + kDisorderedCount;

struct StimulusSpec {
  Condition condition = Condition::Complete;
  Background background = Background::Black;
  Position position = Position::Centered;
  int theta_global = 0;
  std::optional<int> edge_length;  // Aligned and Disordered only
  std::optional<int> theta_local;  // Disordered only

  friend bool operator==(const StimulusSpec&, const StimulusSpec&) = default;
};

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Complete: return "complete";
    case Condition::Aligned: return "aligned";
    case Condition::Disordered: return "disordered";
  }
  return "?";
}
inline std::string_view to_string(Background b) { return b == Background::Black ? "black" : "white"; }
inline std::string_view to_string(Position p) { return p == Position::Centered ? "centered" : "offset"; }

inline Condition parse_condition(std::string_view s) {
  for (auto c : kConditions)
    if (to_string(c) == s) return c;
  throw Error("unknown condition '" + std::string(s) + "'");
}
inline Background parse_background(std::string_view s) {
  for (auto b : kBackgrounds)
    if (to_string(b) == s) return b;
  throw Error("unknown background '" + std::string(s) + "'");
}
inline Position parse_position(std::string_view s) {
  for (auto p : kPositions)
    if (to_string(p) == s) return p;
  throw Error("unknown position '" + std::string(s) + "'");
}

template <class Levels>
bool is_level(const Levels& levels, int v) {
  for (int l : levels)
    if (l == v) return true;
  return false;
}

/// Throws unless the spec carries exactly the factors its condition requires,
/// each at one of the enumerated levels.
inline void validate(const StimulusSpec& s) {
  if (!is_level(kThetaGlobal, s.theta_global))
    throw Error("theta_global " + std::to_string(s.theta_global) + " is not an enumerated level");
  const bool wants_edge = s.condition != Condition::Complete;
  const bool wants_local = s.condition == Condition::Disordered;
  if (wants_edge != s.edge_length.has_value())
    throw Error(std::string(to_string(s.condition)) +
                (wants_edge ? " spec requires edge_length" : " spec must not carry edge_length"));
  if (wants_local != s.theta_local.has_value())
    throw Error(std::string(to_string(s.condition)) +
                (wants_local ? " spec requires theta_local" : " spec must not carry theta_local"));
  if (s.edge_length && !is_level(kEdgeLengths, *s.edge_length))
    throw Error("edge_length " + std::to_string(*s.edge_length) + " is not an enumerated level");
  if (s.theta_local && !is_level(kThetaLocal, *s.theta_local))
    throw Error("theta_local " + std::to_string(*s.theta_local) + " is not an enumerated level");
}

/// All 992 specs. Order: condition (complete, aligned, disordered), then
/// background, position, theta_global, edge_length, theta_local, each
/// ascending in the level arrays above.
inline std::vector<StimulusSpec> enumerate_specs() {
  std::vector<StimulusSpec> out;
  out.reserve(kSpecCount);
  for (auto cond : kConditions)
    for (auto bg : kBackgrounds)
      for (auto pos : kPositions)
        for (int tg : kThetaGlobal) {
          if (cond == Condition::Complete) {
            out.push_back({cond, bg, pos, tg, std::nullopt, std::nullopt});
            continue;
          }
          for (int el : kEdgeLengths) {
            if (cond == Condition::Aligned) {
              out.push_back({cond, bg, pos, tg, el, std::nullopt});
              continue;
            }
            for (int tl : kThetaLocal) out.push_back({cond, bg, pos, tg, el, tl});
          }
        }
  return out;
}

namespace detail {
template <class Levels>
std::size_t level_index(const Levels& levels, int v) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == v) return i;
  throw Error("value " + std::to_string(v) + " is not an enumerated level");
}
}  // namespace detail

/// Position of a spec in enumerate_specs(), computed arithmetically.
inline std::size_t canonical_index(const StimulusSpec& s) {
  validate(s);
  const std::size_t bg = s.background == Background::Black ? 0 : 1;
  const std::size_t pos = s.position == Position::Centered ? 0 : 1;
  const std::size_t tg = detail::level_index(kThetaGlobal, s.theta_global);
  const std::size_t head = (bg * kPositions.size() + pos) * kThetaGlobal.size() + tg;
  switch (s.condition) {
    case Condition::Complete: return head;
    case Condition::Aligned:
      return kCompleteCount + head * kEdgeLengths.size() +
             detail::level_index(kEdgeLengths, *s.edge_length);
    case Condition::Disordered:
      return kCompleteCount + kAlignedCount +
             (head * kEdgeLengths.size() + detail::level_index(kEdgeLengths, *s.edge_length)) *
                 kThetaLocal.size() +
             detail::level_index(kThetaLocal, *s.theta_local);
  }
  return 0;
}

/// Fraction of each triangle side missing from an aligned image.
inline double side_removed_fraction(double edge_length) {
  return (kVertexDistance - 2.0 * edge_length) / kVertexDistance;
}

inline std::string describe(const StimulusSpec& s) {
  std::string out = std::string(to_string(s.condition)) + "/" + std::string(to_string(s.background)) +
                    "/" + std::string(to_string(s.position)) + "/g" + std::to_string(s.theta_global);
  if (s.edge_length) out += "/e" + std::to_string(*s.edge_length);
  if (s.theta_local) out += "/l" + std::to_string(*s.theta_local);
  return out;
}

}  // namespace gcl::stimulus
