#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// The factorial experimental design: axes of condition levels, prompt
// templates with named slots, and deterministic expansion of the full cross
// product into rendered prompt texts.

namespace audit {

enum class LevelKind { treatment, control, nonce };
enum class Voice { employee, employer };

inline const char* to_string(LevelKind k) {
  switch (k) {
    case LevelKind::treatment: return "treatment";
    case LevelKind::control: return "control";
    case LevelKind::nonce: return "nonce";
  }
  return "?";
}

inline const char* to_string(Voice v) {
  return v == Voice::employee ? "employee" : "employer";
}

inline Voice voice_from_string(const std::string& s) {
  if (s == "employee") return Voice::employee;
  if (s == "employer") return Voice::employer;
  throw std::invalid_argument("unknown voice: " + s);
}

struct ConditionLevel {
  std::string name;
  LevelKind kind = LevelKind::treatment;
  std::map<std::string, std::string> fragments;  // slot name -> substitution
  std::map<std::string, std::string> meta;       // display metadata (category, rank, ...)
};

struct Axis {
  std::string name;
  std::vector<ConditionLevel> levels;

  const ConditionLevel* find(const std::string& level_name) const {
    for (const auto& l : levels)
      if (l.name == level_name) return &l;
    return nullptr;
  }
  const ConditionLevel* control() const {
    for (const auto& l : levels)
      if (l.kind == LevelKind::control) return &l;
    return nullptr;
  }
};

struct PromptTemplate {
  Voice voice = Voice::employee;
  std::string body;
  // alternate bodies keyed by the sorted "+"-joined names of the axes whose
  // control level removes its slot entirely (e.g. "major+university")
  std::map<std::string, std::string> control_variants;
};

struct ConditionMatrix {
  std::vector<Axis> axes;
  std::vector<PromptTemplate> templates;

  const Axis* find_axis(const std::string& name) const {
    for (const auto& a : axes)
      if (a.name == name) return &a;
    return nullptr;
  }
  const PromptTemplate* find_template(Voice v) const {
    for (const auto& t : templates)
      if (t.voice == v) return &t;
    return nullptr;
  }
};

// One cell of the cross product: a voice plus one level index per axis,
// aligned with ConditionMatrix::axes.
struct MatrixCoordinate {
  Voice voice = Voice::employee;
  std::vector<std::size_t> level_idx;

  friend bool operator==(const MatrixCoordinate&, const MatrixCoordinate&) = default;
};

inline const ConditionLevel& level_of(const ConditionMatrix& design,
                                      const MatrixCoordinate& coord,
                                      std::size_t axis_index) {
  return design.axes[axis_index].levels[coord.level_idx[axis_index]];
}

inline const ConditionLevel* level_of(const ConditionMatrix& design,
                                      const MatrixCoordinate& coord,
                                      const std::string& axis_name) {
  for (std::size_t a = 0; a < design.axes.size(); ++a)
    if (design.axes[a].name == axis_name) return &level_of(design, coord, a);
  return nullptr;
}

// Stable textual key: voice plus level names in axis order. Used as the join
// key everywhere downstream, so it is case-sensitive and exact.
inline std::string coordinate_key(const ConditionMatrix& design,
                                  const MatrixCoordinate& coord) {
  std::string key = to_string(coord.voice);
  for (std::size_t a = 0; a < design.axes.size(); ++a) {
    key.push_back('\x1f');
    key += level_of(design, coord, a).name;
  }
  return key;
}

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::ostringstream os;
    os << "invalid design:";
    for (const auto& s : issues) os << "\n  - " << s;
    return os.str();
  }
  std::vector<std::string> issues_;
};

class RenderError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Axes whose control level carries no fragments switch the template to a
// control variant; axes whose control level substitutes text (an empty
// pronoun sentence, "The candidate has") do not.
inline bool is_variant_axis(const Axis& axis) {
  const ConditionLevel* c = axis.control();
  return c != nullptr && c->fragments.empty();
}

inline std::string variant_key(const std::vector<std::string>& axis_names) {
  std::vector<std::string> sorted = axis_names;
  std::sort(sorted.begin(), sorted.end());
  std::string key;
  for (const auto& n : sorted) {
    if (!key.empty()) key.push_back('+');
    key += n;
  }
  return key;
}

inline std::string collapse_double_spaces(std::string s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' && !out.empty() && out.back() == ' ') continue;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Full cross product in canonical order: voices ascending, then each axis's
// levels in case-sensitive name order. Byte-identical across runs so query
// logs stay diffable.
inline std::vector<MatrixCoordinate> expand_matrix(const ConditionMatrix& design) {
  std::vector<std::vector<std::size_t>> sorted_levels(design.axes.size());
  for (std::size_t a = 0; a < design.axes.size(); ++a) {
    auto& idx = sorted_levels[a];
    idx.resize(design.axes[a].levels.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return design.axes[a].levels[x].name < design.axes[a].levels[y].name;
    });
  }

  std::vector<Voice> voices;
  for (const auto& t : design.templates) voices.push_back(t.voice);
  std::sort(voices.begin(), voices.end());

  std::vector<MatrixCoordinate> out;
  std::vector<std::size_t> cursor(design.axes.size(), 0);
  for (Voice v : voices) {
    std::fill(cursor.begin(), cursor.end(), 0);
    while (true) {
      MatrixCoordinate c;
      c.voice = v;
      c.level_idx.resize(design.axes.size());
      for (std::size_t a = 0; a < design.axes.size(); ++a)
        c.level_idx[a] = sorted_levels[a][cursor[a]];
      out.push_back(std::move(c));

      std::size_t a = design.axes.size();
      while (a-- > 0) {
        if (++cursor[a] < sorted_levels[a].size()) break;
        cursor[a] = 0;
        if (a == 0) goto next_voice;
      }
      if (design.axes.empty()) break;
    }
  next_voice:;
  }
  return out;
}

// Exact prompt text for one coordinate. Control levels either substitute
// their own fragment text or, when fragment-less, switch to the template's
// control variant for the omitted axes.
inline std::string render_prompt(const ConditionMatrix& design,
                                 const MatrixCoordinate& coord) {
  const PromptTemplate* tmpl = design.find_template(coord.voice);
  if (!tmpl)
    throw RenderError(std::string("no template for voice ") + to_string(coord.voice));

  std::vector<std::string> omitted;
  for (std::size_t a = 0; a < design.axes.size(); ++a) {
    const ConditionLevel& lvl = level_of(design, coord, a);
    if (lvl.kind == LevelKind::control && detail::is_variant_axis(design.axes[a]))
      omitted.push_back(design.axes[a].name);
  }

  const std::string* text = &tmpl->body;
  if (!omitted.empty()) {
    std::string key = detail::variant_key(omitted);
    auto it = tmpl->control_variants.find(key);
    if (it == tmpl->control_variants.end())
      throw RenderError("template for voice " + std::string(to_string(coord.voice)) +
                        " has no control variant '" + key + "'");
    text = &it->second;
  }

  std::string out;
  out.reserve(text->size() + 64);
  for (std::size_t i = 0; i < text->size();) {
    char c = (*text)[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    std::size_t close = text->find('}', i + 1);
    if (close == std::string::npos)
      throw RenderError("unterminated slot in template near offset " + std::to_string(i));
    std::string slot = text->substr(i + 1, close - i - 1);
    const std::string* repl = nullptr;
    for (std::size_t a = 0; a < design.axes.size(); ++a) {
      const ConditionLevel& lvl = level_of(design, coord, a);
      auto it = lvl.fragments.find(slot);
      if (it != lvl.fragments.end()) {
        if (repl)
          throw RenderError("slot '" + slot + "' is bound by more than one axis");
        repl = &it->second;
      }
    }
    if (!repl) throw RenderError("unbound slot '" + slot + "'");
    out += *repl;
    i = close + 1;
  }

  out = detail::collapse_double_spaces(out);
  if (out.empty()) throw RenderError("rendered prompt is empty");
  return out;
}

// Structural validation plus a dry render of every coordinate, so a config
// that validates is guaranteed to expand and render in full.
inline std::vector<MatrixCoordinate> validate_design(const ConditionMatrix& design) {
  std::vector<std::string> issues;
  if (design.axes.empty()) issues.push_back("design has no axes");
  if (design.templates.empty()) issues.push_back("design has no templates");

  std::set<Voice> seen_voices;
  for (const auto& t : design.templates)
    if (!seen_voices.insert(t.voice).second)
      issues.push_back(std::string("duplicate template for voice ") + to_string(t.voice));

  for (const auto& axis : design.axes) {
    if (axis.levels.empty()) issues.push_back("axis '" + axis.name + "' has no levels");
    std::set<std::string> names;
    std::size_t controls = 0;
    for (const auto& lvl : axis.levels) {
      if (!names.insert(lvl.name).second)
        issues.push_back("axis '" + axis.name + "' has duplicate level '" + lvl.name + "'");
      if (lvl.kind == LevelKind::control) ++controls;
    }
    if (controls != 1)
      issues.push_back("axis '" + axis.name + "' must have exactly one control level, has " +
                       std::to_string(controls));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<MatrixCoordinate> coords = expand_matrix(design);
  for (const auto& c : coords) {
    try {
      render_prompt(design, c);
    } catch (const RenderError& e) {
      issues.push_back("coordinate '" + coordinate_key(design, c) + "': " + e.what());
      if (issues.size() >= 10) break;  // enough to diagnose
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return coords;
}

}  // namespace audit
