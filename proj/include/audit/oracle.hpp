#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "audit/config.hpp"
#include "audit/design.hpp"
#include "audit/money.hpp"
#include "audit/rng.hpp"

// Deterministic fake model endpoint. Given a coordinate, a draw index, and a
// seeded spec, it emits a salary-offer response with configurable additive
// effects, $5,000-style rounding, ranges, verbosity, and refusals. The same
// inputs always produce the same bytes, which makes it the ground truth for
// end-to-end validation.

namespace audit {

namespace detail {

inline double round_to_quantum(double value, double quantum) {
  double q = std::floor(value / quantum + 0.5) * quantum;  // half rounds up
  if (q < quantum) q = quantum;                            // floored at one quantum
  return q;
}

}  // namespace detail

// target = base + sum of effects + normal noise, rounded to the quantum.
// The draw stream is keyed by (seed, model, coordinate key, draw index).
inline std::string oracle_respond(const OracleSpec& spec, const ConditionMatrix& design,
                                  const std::string& model_id,
                                  const MatrixCoordinate& coord, int draw_index) {
  std::string key = model_id + '\x1e' + coordinate_key(design, coord) + '\x1e' +
                    std::to_string(draw_index);
  KeyedRng rng(spec.seed, key);

  // fixed draw order: refusal, range, verbose, spread, then noise
  const double u_refuse = rng.next_double();
  const double u_range = rng.next_double();
  const double u_verbose = rng.next_double();
  const std::uint64_t spread_steps = 1 + rng.next_below(3);
  const double noise = spec.noise_sd > 0.0 ? rng.next_normal() * spec.noise_sd : 0.0;

  if (u_refuse < spec.refusal_prob) {
    return "As an AI language model, I cannot provide real-time salary information "
           "or personal advice. It's essential to research industry standards, job "
           "market conditions, and comparable roles before deciding on an opening "
           "offer. Good luck with your negotiation!";
  }

  double target = spec.base_offer(model_id, coord.voice);
  for (std::size_t a = 0; a < design.axes.size(); ++a)
    target += spec.effect(design.axes[a].name, level_of(design, coord, a).name);
  target += noise;
  target = detail::round_to_quantum(target, spec.rounding_quantum);

  auto as_money = [](double dollars) {
    return Money{static_cast<std::int64_t>(std::llround(dollars * 100.0))};
  };

  std::string amount_text;
  if (u_range < spec.range_prob && target > spread_steps * spec.rounding_quantum) {
    // symmetric range whose midpoint is exactly the target
    double spread = static_cast<double>(spread_steps) * spec.rounding_quantum;
    amount_text = format_usd(as_money(target - spread)) + " to " +
                  format_usd(as_money(target + spread));
  } else {
    amount_text = format_usd(as_money(target));
  }

  if (u_verbose < spec.verbose_prob) {
    return "Considering the degree, relevant experience, and the position in "
           "question, a reasonable opening offer would be " + amount_text +
           " annually. It is always worth doing further research on comparable "
           "roles before settling on a final figure.";
  }
  return amount_text;
}

// Recovers the coordinate from a rendered prompt by substring search, so the
// HTTP face of the oracle can serve the standard chat-completion wire shape
// with no side-channel metadata.
//
// Voice comes from which template body prefix matches; each axis picks the
// level whose identifying text occurs in the prompt, preferring the longest
// match, and falls back to the axis's control level.
inline MatrixCoordinate infer_coordinate(const ConditionMatrix& design,
                                         const std::string& prompt) {
  MatrixCoordinate coord;
  const std::string employee_prefix = "I am a recent college graduate";
  coord.voice = prompt.rfind(employee_prefix, 0) == 0 ? Voice::employee : Voice::employer;

  coord.level_idx.resize(design.axes.size());
  for (std::size_t a = 0; a < design.axes.size(); ++a) {
    const Axis& axis = design.axes[a];
    std::size_t best = axis.levels.size();
    std::size_t best_len = 0;
    std::size_t control = 0;
    for (std::size_t i = 0; i < axis.levels.size(); ++i) {
      const ConditionLevel& lvl = axis.levels[i];
      if (lvl.kind == LevelKind::control) {
        control = i;
        continue;
      }
      // a level identifies itself by any non-empty fragment occurring verbatim
      for (const auto& [slot, text] : lvl.fragments) {
        if (text.empty()) continue;
        if (prompt.find(text) != std::string::npos && text.size() > best_len) {
          best = i;
          best_len = text.size();
        }
      }
    }
    coord.level_idx[a] = best < axis.levels.size() ? best : control;
  }
  return coord;
}

}  // namespace audit
