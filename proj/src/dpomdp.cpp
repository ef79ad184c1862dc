#include "decembed/dpomdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace decembed {

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::syntax: return "syntax";
    case ParseErrorKind::semantic: return "semantic";
    case ParseErrorKind::unsupported_construct: return "unsupported-construct";
  }
  return "unknown";
}

ParseError::ParseError(std::string origin, int line, int column, ParseErrorKind kind, std::string message)
    : std::runtime_error(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         to_string(kind) + " error: " + message),
      origin_(std::move(origin)),
      line_(line),
      column_(column),
      kind_(kind),
      message_(std::move(message)) {}

namespace {

constexpr double kRowTolerance = 1e-9;

struct Token {
  std::string text;
  int column;
};

struct Line {
  int number;
  std::vector<Token> tokens;
};

std::vector<Line> tokenize(const std::string& text) {
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    Line line{number, {}};
    std::size_t i = 0;
    while (i < raw.size()) {
      const char c = raw[i];
      if (c == ' ' || c == '\t') {
        ++i;
      } else if (c == ':') {
        line.tokens.push_back({":", static_cast<int>(i) + 1});
        ++i;
      } else {
        const std::size_t begin = i;
        while (i < raw.size() && raw[i] != ' ' && raw[i] != '\t' && raw[i] != ':') ++i;
        line.tokens.push_back({raw.substr(begin, i - begin), static_cast<int>(begin) + 1});
      }
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long> to_integer(const std::string& s) {
  long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

/// Cells written by fully explicit entries, to detect conflicting duplicates.
class ExplicitCells {
 public:
  /// Returns false when the cell was already set explicitly to another value.
  bool record(std::uint64_t key, double value) {
    auto [it, inserted] = cells_.try_emplace(key, value);
    if (inserted) return true;
    const bool same = std::abs(it->second - value) <= 1e-12;
    it->second = value;
    return same;
  }

 private:
  std::unordered_map<std::uint64_t, double> cells_;
};

struct RewardOverride {
  std::vector<int> next_states;  // empty = any
  std::vector<int> joint_obs;    // empty = any
  double value;
};

class Parser {
 public:
  explicit Parser(const DpomdpSource& src) : origin_(src.origin), lines_(tokenize(src.text)) {}

  EnvModel run() {
    parse_header();
    model_.allocate();
    transition_rows_.assign(model_.num_states() * model_.num_joint_actions(), {});
    transition_lines_.assign(transition_rows_.size(), 0);
    obs_lines_.assign(model_.num_joint_actions() * model_.num_states(), 0);
    common_lines_.assign(obs_lines_.size(), 0);
    reward_base_.assign(transition_rows_.size(), 0.0);
    reward_overrides_.assign(transition_rows_.size(), {});
    apply_start();
    parse_body();
    finish();
    return std::move(model_);
  }

 private:
  [[noreturn]] void fail(int line, int column, ParseErrorKind kind, const std::string& msg) const {
    throw ParseError(origin_, line, column, kind, msg);
  }
  [[noreturn]] void fail(const Line& line, const Token& tok, ParseErrorKind kind, const std::string& msg) const {
    fail(line.number, tok.column, kind, msg);
  }

  bool at_end() const { return pos_ >= lines_.size(); }
  const Line& current() const { return lines_[pos_]; }

  static bool is_key(const Line& line, const char* key) {
    return line.tokens.size() >= 2 && line.tokens[0].text == key && line.tokens[1].text == ":";
  }

  // ---- header ------------------------------------------------------------

  std::vector<std::string> name_list(const Line& line, std::size_t first, const std::string& prefix) {
    std::vector<std::string> names;
    if (line.tokens.size() == first + 1) {
      if (auto n = to_integer(line.tokens[first].text)) {
        if (*n < 1) fail(line, line.tokens[first], ParseErrorKind::semantic, "count must be positive");
        for (long k = 0; k < *n; ++k) names.push_back(prefix + std::to_string(k));
        return names;
      }
    }
    for (std::size_t k = first; k < line.tokens.size(); ++k) {
      const auto& tok = line.tokens[k];
      if (tok.text == ":") fail(line, tok, ParseErrorKind::syntax, "unexpected ':' in name list");
      if (std::find(names.begin(), names.end(), tok.text) != names.end())
        fail(line, tok, ParseErrorKind::semantic, "duplicate name '" + tok.text + "'");
      names.push_back(tok.text);
    }
    if (names.empty()) fail(line.number, 1, ParseErrorKind::syntax, "empty name list");
    return names;
  }

  /// Tokens after "key :" or, when none, the tokens of the next line.
  const Line& value_line(std::size_t& first) {
    const Line& line = current();
    if (line.tokens.size() > 2) {
      first = 2;
      ++pos_;
      return line;
    }
    ++pos_;
    if (at_end()) fail(line.number, line.tokens[0].column, ParseErrorKind::syntax, "missing value");
    first = 0;
    return lines_[pos_++];
  }

  void parse_header() {
    bool have_agents = false, have_states = false, have_actions = false, have_obs = false;
    while (!at_end()) {
      const Line& line = current();
      const std::string& key = line.tokens[0].text;
      if (key == "T" || key == "O" || key == "R" || key == "Zc") break;
      if (key == "start" && line.tokens.size() > 1 &&
          (line.tokens[1].text == "include" || line.tokens[1].text == "exclude"))
        fail(line, line.tokens[1], ParseErrorKind::unsupported_construct, "start include/exclude is not supported");
      if (line.tokens.size() < 2 || line.tokens[1].text != ":")
        fail(line, line.tokens[0], ParseErrorKind::syntax, "expected '<key>:'");

      if (key == "agents") {
        std::size_t first = 0;
        const Line& v = value_line(first);
        model_.num_agents = name_list(v, first, "agent").size();
        have_agents = true;
      } else if (key == "discount") {
        std::size_t first = 0;
        const Line& v = value_line(first);
        auto d = to_number(v.tokens[first].text);
        if (!d || v.tokens.size() != first + 1) fail(v, v.tokens[first], ParseErrorKind::syntax, "discount must be a number");
        model_.discount = *d;
      } else if (key == "values") {
        std::size_t first = 0;
        const Line& v = value_line(first);
        const auto& t = v.tokens[first];
        if (t.text == "reward") cost_ = false;
        else if (t.text == "cost") cost_ = true;
        else fail(v, t, ParseErrorKind::syntax, "values must be 'reward' or 'cost'");
      } else if (key == "horizon") {
        std::size_t first = 0;
        const Line& v = value_line(first);
        auto h = to_integer(v.tokens[first].text);
        if (!h || *h < 1) fail(v, v.tokens[first], ParseErrorKind::semantic, "horizon must be a positive integer");
        model_.horizon = static_cast<int>(*h);
      } else if (key == "states") {
        std::size_t first = 0;
        const Line& v = value_line(first);
        model_.states = name_list(v, first, "s");
        have_states = true;
      } else if (key == "start") {
        if (!have_states) fail(line, line.tokens[0], ParseErrorKind::semantic, "start given before states");
        start_line_ = line.number;
        std::size_t first = 0;
        const Line& v = value_line(first);
        start_tokens_.assign(v.tokens.begin() + static_cast<long>(first), v.tokens.end());
        start_value_line_ = v.number;
        // A probability vector may continue over several lines.
        if (start_tokens_.size() == 1 || start_tokens_.front().text == "uniform") continue;
        while (start_tokens_.size() < model_.num_states() && !at_end() && to_number(current().tokens[0].text)) {
          for (const auto& tok : current().tokens) start_tokens_.push_back(tok);
          ++pos_;
        }
      } else if (key == "actions" || key == "observations") {
        if (!have_agents) fail(line, line.tokens[0], ParseErrorKind::semantic, key + " given before agents");
        if (line.tokens.size() > 2) fail(line, line.tokens[2], ParseErrorKind::syntax, "one line per agent expected after '" + key + ":'");
        ++pos_;
        std::vector<std::vector<std::string>> per_agent;
        for (std::size_t i = 0; i < model_.num_agents; ++i) {
          if (at_end()) fail(line, line.tokens[0], ParseErrorKind::syntax, "missing line for agent " + std::to_string(i));
          per_agent.push_back(name_list(current(), 0, key == "actions" ? "a" : "o"));
          ++pos_;
        }
        (key == "actions" ? model_.actions : model_.private_obs) = std::move(per_agent);
        (key == "actions" ? have_actions : have_obs) = true;
      } else if (key == "common-observations") {
        std::size_t first = 0;
        const Line& v = value_line(first);
        model_.common_obs = name_list(v, first, "z");
      } else {
        fail(line, line.tokens[0], ParseErrorKind::unsupported_construct, "unknown header key '" + key + "'");
      }
    }
    const int where = at_end() ? (lines_.empty() ? 1 : lines_.back().number) : current().number;
    if (!have_agents) fail(where, 1, ParseErrorKind::semantic, "missing 'agents:'");
    if (!have_states) fail(where, 1, ParseErrorKind::semantic, "missing 'states:'");
    if (!have_actions) fail(where, 1, ParseErrorKind::semantic, "missing 'actions:'");
    if (!have_obs) fail(where, 1, ParseErrorKind::semantic, "missing 'observations:'");
    if (start_tokens_.empty()) fail(where, 1, ParseErrorKind::semantic, "missing 'start:'");
  }

  void apply_start() {
    const std::size_t S = model_.num_states();
    Line pseudo{start_value_line_, start_tokens_};
    if (start_tokens_.size() == 1) {
      const auto& tok = start_tokens_[0];
      if (tok.text == "uniform") {
        std::fill(model_.start.begin(), model_.start.end(), 1.0 / static_cast<double>(S));
        return;
      }
      if (S != 1 || !to_number(tok.text)) {
        const int s = resolve(pseudo, tok, model_.states, "state");
        model_.start[s] = 1.0;
        return;
      }
    }
    if (start_tokens_.size() != S)
      fail(pseudo, start_tokens_.front(), ParseErrorKind::syntax,
           "start needs " + std::to_string(S) + " probabilities, got " + std::to_string(start_tokens_.size()));
    for (std::size_t s = 0; s < S; ++s) model_.start[s] = number(pseudo, start_tokens_[s]);
  }

  // ---- body --------------------------------------------------------------

  double number(const Line& line, const Token& tok) const {
    auto v = to_number(tok.text);
    if (!v) fail(line, tok, ParseErrorKind::syntax, "expected a number, got '" + tok.text + "'");
    return *v;
  }

  double probability(const Line& line, const Token& tok) const {
    const double p = number(line, tok);
    if (p < 0.0 || p > 1.0 + kRowTolerance) fail(line, tok, ParseErrorKind::semantic, "probability outside [0, 1]");
    return p;
  }

  int resolve(const Line& line, const Token& tok, const std::vector<std::string>& names, const char* what) const {
    auto& index = name_index_[&names];
    if (index.size() != names.size()) {
      index.clear();
      for (std::size_t k = 0; k < names.size(); ++k) index.emplace(names[k], static_cast<int>(k));
    }
    if (auto it = index.find(tok.text); it != index.end()) return it->second;
    if (auto n = to_integer(tok.text)) {
      if (*n < 0 || static_cast<std::size_t>(*n) >= names.size())
        fail(line, tok, ParseErrorKind::semantic, std::string(what) + " index " + tok.text + " out of range");
      return static_cast<int>(*n);
    }
    fail(line, tok, ParseErrorKind::semantic, std::string("unknown ") + what + " '" + tok.text + "'");
  }

  /// Expands a single-index field; `*` selects every index.
  std::vector<int> index_set(const Line& line, const std::vector<Token>& group, const std::vector<std::string>& names,
                             const char* what) const {
    if (group.size() != 1) {
      const Token& at = group.empty() ? line.tokens[0] : group[1];
      fail(line, at, ParseErrorKind::syntax, std::string("expected one ") + what);
    }
    if (group[0].text == "*") {
      std::vector<int> all(names.size());
      for (std::size_t k = 0; k < names.size(); ++k) all[k] = static_cast<int>(k);
      return all;
    }
    return {resolve(line, group[0], names, what)};
  }

  /// Expands a joint field: one token (`*`, joint index) or one token per agent.
  std::vector<int> joint_set(const Line& line, const std::vector<Token>& group,
                             const std::vector<std::vector<std::string>>& alphabets, const char* what) const {
    std::size_t total = 1;
    for (const auto& a : alphabets) total *= a.size();
    if (group.empty()) fail(line.number, line.tokens[0].column, ParseErrorKind::syntax, std::string("missing joint ") + what);
    if (group.size() == 1 && alphabets.size() > 1) {
      if (group[0].text == "*") {
        std::vector<int> all(total);
        for (std::size_t k = 0; k < total; ++k) all[k] = static_cast<int>(k);
        return all;
      }
      auto n = to_integer(group[0].text);
      if (!n) fail(line, group[0], ParseErrorKind::syntax, std::string("joint ") + what + " needs one entry per agent");
      if (*n < 0 || static_cast<std::size_t>(*n) >= total)
        fail(line, group[0], ParseErrorKind::semantic, std::string("joint ") + what + " index out of range");
      return {static_cast<int>(*n)};
    }
    if (group.size() != alphabets.size())
      fail(line, group[0], ParseErrorKind::syntax,
           std::string("joint ") + what + " needs " + std::to_string(alphabets.size()) + " entries");
    std::vector<int> result{0};
    for (std::size_t i = 0; i < alphabets.size(); ++i) {
      std::vector<int> digits;
      if (group[i].text == "*") {
        for (std::size_t k = 0; k < alphabets[i].size(); ++k) digits.push_back(static_cast<int>(k));
      } else {
        digits.push_back(resolve(line, group[i], alphabets[i], what));
      }
      std::vector<int> next;
      for (int prefix : result)
        for (int d : digits) next.push_back(prefix * static_cast<int>(alphabets[i].size()) + d);
      result = std::move(next);
    }
    return result;
  }

  static bool is_wild(const std::vector<Token>& group) {
    return std::any_of(group.begin(), group.end(), [](const Token& t) { return t.text == "*"; });
  }

  std::vector<std::vector<Token>> split_fields(const Line& line) const {
    std::vector<std::vector<Token>> fields(1);
    for (std::size_t k = 2; k < line.tokens.size(); ++k) {
      if (line.tokens[k].text == ":") fields.emplace_back();
      else fields.back().push_back(line.tokens[k]);
    }
    return fields;
  }

  /// Reads `count` numbers from `inline_tokens` and then from following lines.
  std::vector<std::pair<double, Token>> read_numbers(const Line& line, std::vector<Token> inline_tokens, std::size_t count,
                                                     const Line** last_line) {
    std::vector<std::pair<double, Token>> values;
    *last_line = &line;
    for (const auto& tok : inline_tokens) values.emplace_back(number(line, tok), tok);
    while (values.size() < count) {
      if (at_end() || !to_number(current().tokens[0].text))
        fail(line.number, line.tokens[0].column, ParseErrorKind::syntax,
             "expected " + std::to_string(count) + " numbers, got " + std::to_string(values.size()));
      const Line& next = current();
      for (const auto& tok : next.tokens) values.emplace_back(number(next, tok), tok);
      *last_line = &next;
      ++pos_;
    }
    if (values.size() != count)
      fail(**last_line, values[count].second, ParseErrorKind::syntax,
           "expected " + std::to_string(count) + " numbers, got " + std::to_string(values.size()));
    return values;
  }

  /// Token group after the last colon, or the first token of the next line when empty.
  std::vector<Token> trailing(const Line& line, const std::vector<Token>& group, bool& from_next_line) {
    from_next_line = false;
    if (!group.empty()) return group;
    if (at_end()) fail(line.number, line.tokens.back().column, ParseErrorKind::syntax, "missing matrix after ':'");
    const Line& next = current();
    if (next.tokens[0].text == "uniform" || next.tokens[0].text == "identity") {
      if (next.tokens.size() != 1) fail(next, next.tokens[1], ParseErrorKind::syntax, "unexpected tokens after keyword");
      ++pos_;
      from_next_line = true;
      return next.tokens;
    }
    return {};
  }

  void parse_body() {
    while (!at_end()) {
      const Line& line = current();
      ++pos_;
      const std::string& key = line.tokens[0].text;
      if (line.tokens.size() < 2 || line.tokens[1].text != ":")
        fail(line, line.tokens[0], ParseErrorKind::syntax, "expected '<key>:'");
      if (key == "T") parse_transition(line);
      else if (key == "O") parse_observation(line, false);
      else if (key == "Zc") parse_observation(line, true);
      else if (key == "R") parse_reward(line);
      else if (key == "agents" || key == "states" || key == "actions" || key == "observations" || key == "start" ||
               key == "discount" || key == "values" || key == "horizon" || key == "common-observations")
        fail(line, line.tokens[0], ParseErrorKind::syntax, "header key '" + key + "' after model entries");
      else fail(line, line.tokens[0], ParseErrorKind::unsupported_construct, "unknown entry '" + key + "'");
    }
  }

  void set_transition(const Line& line, const Token& tok, int s, int ja, int next, double p, bool explicit_cell) {
    const std::size_t JA = model_.num_joint_actions(), S = model_.num_states();
    const std::size_t row = static_cast<std::size_t>(s) * JA + static_cast<std::size_t>(ja);
    if (explicit_cell && !transition_explicit_.record(row * S + static_cast<std::size_t>(next), p))
      fail(line, tok, ParseErrorKind::semantic, "conflicting duplicate transition entry");
    if (p == 0.0) transition_rows_[row].erase(next);
    else transition_rows_[row][next] = p;
    transition_lines_[row] = line.number;
  }

  void parse_transition(const Line& line) {
    const auto fields = split_fields(line);
    const std::size_t S = model_.num_states();
    if (fields.size() < 2 || fields.size() > 4)
      fail(line, line.tokens[0], ParseErrorKind::syntax, "malformed T entry");
    const auto jas = joint_set(line, fields[0], model_.actions, "action");

    if (fields.size() == 4) {
      const auto ss = index_set(line, fields[1], model_.states, "state");
      const auto ns = index_set(line, fields[2], model_.states, "state");
      if (fields[3].size() != 1) fail(line, fields[3].empty() ? line.tokens.back() : fields[3][0], ParseErrorKind::syntax, "expected one probability");
      const double p = probability(line, fields[3][0]);
      const bool exact = !is_wild(fields[0]) && !is_wild(fields[1]) && !is_wild(fields[2]);
      for (int ja : jas)
        for (int s : ss)
          for (int n : ns) set_transition(line, fields[3][0], s, ja, n, p, exact);
      return;
    }
    if (fields.size() == 3) {
      const auto ss = index_set(line, fields[1], model_.states, "state");
      bool next_line = false;
      auto rest = trailing(line, fields[2], next_line);
      std::vector<double> row(S, 0.0);
      if (rest.size() == 1 && rest[0].text == "uniform") {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(S));
      } else {
        const Line* last = nullptr;
        const auto values = read_numbers(line, rest, S, &last);
        for (std::size_t k = 0; k < S; ++k) row[k] = probability(*last, values[k].second);
      }
      for (int ja : jas)
        for (int s : ss)
          for (std::size_t n = 0; n < S; ++n) set_transition(line, line.tokens[0], s, ja, static_cast<int>(n), row[n], false);
      return;
    }
    bool next_line = false;
    auto rest = trailing(line, fields[1], next_line);
    if (rest.size() == 1 && (rest[0].text == "uniform" || rest[0].text == "identity")) {
      const bool identity = rest[0].text == "identity";
      for (int ja : jas)
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t n = 0; n < S; ++n) {
            const double p = identity ? (s == n ? 1.0 : 0.0) : 1.0 / static_cast<double>(S);
            set_transition(line, rest[0], static_cast<int>(s), ja, static_cast<int>(n), p, false);
          }
      return;
    }
    const Line* last = nullptr;
    const auto values = read_numbers(line, rest, S * S, &last);
    for (int ja : jas)
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t n = 0; n < S; ++n)
          set_transition(line, line.tokens[0], static_cast<int>(s), ja, static_cast<int>(n),
                         probability(*last, values[s * S + n].second), false);
  }

  void parse_observation(const Line& line, bool common) {
    if (common && !model_.has_common_channel())
      fail(line, line.tokens[0], ParseErrorKind::semantic, "Zc entry without a common-observations section");
    const auto fields = split_fields(line);
    const std::size_t S = model_.num_states();
    const std::size_t width = common ? model_.num_common_obs() : model_.num_joint_obs();
    auto& table = common ? model_.common : model_.observation;
    auto& lines = common ? common_lines_ : obs_lines_;
    auto& explicit_cells = common ? common_explicit_ : obs_explicit_;
    const char* entry = common ? "Zc" : "O";
    if (fields.size() < 2 || fields.size() > 4)
      fail(line, line.tokens[0], ParseErrorKind::syntax, std::string("malformed ") + entry + " entry");
    const auto jas = joint_set(line, fields[0], model_.actions, "action");

    auto put = [&](int ja, int next, std::size_t o, double p, bool exact, const Token& tok) {
      const std::size_t row = static_cast<std::size_t>(ja) * S + static_cast<std::size_t>(next);
      if (exact && !explicit_cells.record(row * width + o, p))
        fail(line, tok, ParseErrorKind::semantic, std::string("conflicting duplicate ") + entry + " entry");
      table[row * width + o] = p;
      lines[row] = line.number;
    };

    if (fields.size() == 4) {
      const auto ns = index_set(line, fields[1], model_.states, "state");
      const auto os = common ? index_set(line, fields[2], model_.common_obs, "common observation")
                             : joint_set(line, fields[2], model_.private_obs, "observation");
      if (fields[3].size() != 1) fail(line, fields[3].empty() ? line.tokens.back() : fields[3][0], ParseErrorKind::syntax, "expected one probability");
      const double p = probability(line, fields[3][0]);
      const bool exact = !is_wild(fields[0]) && !is_wild(fields[1]) && !is_wild(fields[2]);
      for (int ja : jas)
        for (int n : ns)
          for (int o : os) put(ja, n, static_cast<std::size_t>(o), p, exact, fields[3][0]);
      return;
    }
    if (fields.size() == 3) {
      const auto ns = index_set(line, fields[1], model_.states, "state");
      bool next_line = false;
      auto rest = trailing(line, fields[2], next_line);
      std::vector<double> row(width, 0.0);
      if (rest.size() == 1 && rest[0].text == "uniform") {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(width));
      } else {
        const Line* last = nullptr;
        const auto values = read_numbers(line, rest, width, &last);
        for (std::size_t k = 0; k < width; ++k) row[k] = probability(*last, values[k].second);
      }
      for (int ja : jas)
        for (int n : ns)
          for (std::size_t o = 0; o < width; ++o) put(ja, n, o, row[o], false, line.tokens[0]);
      return;
    }
    bool next_line = false;
    auto rest = trailing(line, fields[1], next_line);
    if (rest.size() == 1 && rest[0].text == "identity")
      fail(line, rest[0], ParseErrorKind::unsupported_construct, std::string("'identity' is not supported for ") + entry);
    if (rest.size() == 1 && rest[0].text == "uniform") {
      for (int ja : jas)
        for (std::size_t n = 0; n < S; ++n)
          for (std::size_t o = 0; o < width; ++o)
            put(ja, static_cast<int>(n), o, 1.0 / static_cast<double>(width), false, rest[0]);
      return;
    }
    const Line* last = nullptr;
    const auto values = read_numbers(line, rest, S * width, &last);
    for (int ja : jas)
      for (std::size_t n = 0; n < S; ++n)
        for (std::size_t o = 0; o < width; ++o)
          put(ja, static_cast<int>(n), o, probability(*last, values[n * width + o].second), false, line.tokens[0]);
  }

  void parse_reward(const Line& line) {
    const auto fields = split_fields(line);
    if (fields.size() < 4)
      fail(line, line.tokens[0], ParseErrorKind::unsupported_construct, "R entries need at least '<ja> : <s> : <s'> :'");
    if (fields.size() > 5) fail(line, line.tokens[0], ParseErrorKind::syntax, "malformed R entry");
    const auto jas = joint_set(line, fields[0], model_.actions, "action");
    const auto ss = index_set(line, fields[1], model_.states, "state");
    const std::size_t JA = model_.num_joint_actions(), JO = model_.num_joint_obs();
    const double sign = cost_ ? -1.0 : 1.0;

    if (fields.size() == 5) {
      if (fields[4].size() != 1) fail(line, fields[4].empty() ? line.tokens.back() : fields[4][0], ParseErrorKind::syntax, "expected one reward");
      const double r = sign * number(line, fields[4][0]);
      const bool any_next = fields[2].size() == 1 && fields[2][0].text == "*";
      const bool any_obs = fields[3].size() == 1 && fields[3][0].text == "*";
      std::vector<int> ns, os;
      if (!any_next) ns = index_set(line, fields[2], model_.states, "state");
      if (!any_obs) os = joint_set(line, fields[3], model_.private_obs, "observation");
      const bool exact = !is_wild(fields[0]) && !is_wild(fields[1]) && !any_next && !any_obs && !is_wild(fields[3]);
      for (int ja : jas)
        for (int s : ss) {
          const std::size_t cell = static_cast<std::size_t>(s) * JA + static_cast<std::size_t>(ja);
          if (exact) {
            const std::uint64_t key = (cell * model_.num_states() + static_cast<std::size_t>(ns[0])) * JO +
                                      static_cast<std::size_t>(os[0]);
            if (!reward_explicit_.record(key, r)) fail(line, fields[4][0], ParseErrorKind::semantic, "conflicting duplicate R entry");
          }
          if (any_next && any_obs) {
            reward_base_[cell] = r;
            reward_overrides_[cell].clear();
          } else {
            reward_overrides_[cell].push_back({ns, os, r});
          }
        }
      return;
    }
    // R: ja : s : s' : followed by one value per joint observation
    const auto ns = index_set(line, fields[2], model_.states, "state");
    bool next_line = false;
    auto rest = trailing(line, fields[3], next_line);
    const Line* last = nullptr;
    const auto values = read_numbers(line, rest, JO, &last);
    for (int ja : jas)
      for (int s : ss) {
        const std::size_t cell = static_cast<std::size_t>(s) * JA + static_cast<std::size_t>(ja);
        for (std::size_t o = 0; o < JO; ++o)
          reward_overrides_[cell].push_back({ns, {static_cast<int>(o)}, sign * values[o].first});
      }
  }

  void finish() {
    const std::size_t S = model_.num_states(), JA = model_.num_joint_actions(), JO = model_.num_joint_obs();
    for (std::size_t row = 0; row < transition_rows_.size(); ++row) {
      auto& out = model_.transition[row];
      for (const auto& [next, p] : transition_rows_[row])
        if (p > 0.0) out.push_back({next, p});
    }
    // Report the first semantic violation at the line that last touched it.
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t ja = 0; ja < JA; ++ja) {
        double total = 0.0;
        for (const auto& o : model_.transition[s * JA + ja]) total += o.prob;
        if (std::abs(total - 1.0) > kRowTolerance)
          fail(transition_lines_[s * JA + ja] == 0 ? 1 : transition_lines_[s * JA + ja], 1, ParseErrorKind::semantic,
               "T row (ja=" + std::to_string(ja) + ", s=" + model_.states[s] + ") sums to " + std::to_string(total));
      }
    auto check_rows = [&](const std::vector<double>& table, std::size_t width, const std::vector<int>& lines,
                          const char* entry) {
      for (std::size_t ja = 0; ja < JA; ++ja)
        for (std::size_t n = 0; n < S; ++n) {
          double total = 0.0;
          for (std::size_t o = 0; o < width; ++o) total += table[(ja * S + n) * width + o];
          if (std::abs(total - 1.0) > kRowTolerance)
            fail(lines[ja * S + n] == 0 ? 1 : lines[ja * S + n], 1, ParseErrorKind::semantic,
                 std::string(entry) + " row (ja=" + std::to_string(ja) + ", s'=" + model_.states[n] + ") sums to " +
                     std::to_string(total));
        }
    };
    check_rows(model_.observation, JO, obs_lines_, "O");
    if (model_.has_common_channel()) check_rows(model_.common, model_.num_common_obs(), common_lines_, "Zc");
    double start_total = 0.0;
    for (double p : model_.start) start_total += p;
    if (std::abs(start_total - 1.0) > kRowTolerance)
      fail(start_line_, 1, ParseErrorKind::semantic, "start distribution sums to " + std::to_string(start_total));

    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t ja = 0; ja < JA; ++ja) {
        const std::size_t cell = s * JA + ja;
        const auto& overrides = reward_overrides_[cell];
        if (overrides.empty()) {
          model_.reward[cell] = reward_base_[cell];
          continue;
        }
        double expected = 0.0;
        for (const auto& o : model_.transition[cell])
          for (std::size_t jo = 0; jo < JO; ++jo) {
            const double p = o.prob * model_.obs_prob(ja, static_cast<std::size_t>(o.next_state), jo);
            if (p <= 0.0) continue;
            double r = reward_base_[cell];
            for (const auto& ov : overrides) {
              const bool next_ok = ov.next_states.empty() ||
                                   std::find(ov.next_states.begin(), ov.next_states.end(), o.next_state) != ov.next_states.end();
              const bool obs_ok = ov.joint_obs.empty() ||
                                  std::find(ov.joint_obs.begin(), ov.joint_obs.end(), static_cast<int>(jo)) != ov.joint_obs.end();
              if (next_ok && obs_ok) r = ov.value;
            }
            expected += p * r;
          }
        model_.reward[cell] = expected;
      }
  }

  std::string origin_;
  std::vector<Line> lines_;
  mutable std::map<const void*, std::unordered_map<std::string, int>> name_index_;
  std::size_t pos_ = 0;
  EnvModel model_;
  bool cost_ = false;
  std::vector<Token> start_tokens_;
  int start_line_ = 1;
  int start_value_line_ = 1;
  std::vector<std::map<int, double>> transition_rows_;
  std::vector<int> transition_lines_, obs_lines_, common_lines_;
  ExplicitCells transition_explicit_, obs_explicit_, common_explicit_, reward_explicit_;
  std::vector<double> reward_base_;
  std::vector<std::vector<RewardOverride>> reward_overrides_;
};

std::string format_prob(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", p);
  return buf;
}

std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EnvModel parse_dpomdp(const DpomdpSource& src) { return Parser(src).run(); }

EnvModel load_dpomdp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dpomdp({buf.str(), path});
}

std::string serialize_dpomdp(const EnvModel& m) {
  std::ostringstream out;
  auto join = [](const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t k = 0; k < names.size(); ++k) s += (k ? " " : "") + names[k];
    return s;
  };
  const std::size_t S = m.num_states(), JA = m.num_joint_actions(), JO = m.num_joint_obs();
  auto ja_names = [&](std::size_t ja) {
    const auto acts = m.split_joint_action(ja);
    std::string s;
    for (std::size_t i = 0; i < acts.size(); ++i) s += (i ? " " : "") + m.actions[i][acts[i]];
    return s;
  };
  auto jo_names = [&](std::size_t jo) {
    const auto obs = m.split_joint_obs(jo);
    std::string s;
    for (std::size_t i = 0; i < obs.size(); ++i) s += (i ? " " : "") + m.private_obs[i][obs[i]];
    return s;
  };

  out << "agents: " << m.num_agents << "\n";
  out << "discount: " << format_exact(m.discount) << "\n";
  out << "values: reward\n";
  out << "horizon: " << m.horizon << "\n";
  out << "states: " << join(m.states) << "\n";
  out << "start:\n";
  for (std::size_t s = 0; s < S; ++s) out << (s ? " " : "") << format_prob(m.start[s]);
  out << "\nactions:\n";
  for (const auto& a : m.actions) out << join(a) << "\n";
  out << "observations:\n";
  for (const auto& o : m.private_obs) out << join(o) << "\n";
  if (m.has_common_channel()) out << "common-observations: " << join(m.common_obs) << "\n";

  for (std::size_t ja = 0; ja < JA; ++ja) {
    const std::string jan = ja_names(ja);
    for (std::size_t s = 0; s < S; ++s)
      for (const auto& o : m.transitions(s, ja))
        out << "T: " << jan << " : " << m.states[s] << " : " << m.states[o.next_state] << " : " << format_prob(o.prob) << "\n";
  }
  for (std::size_t ja = 0; ja < JA; ++ja) {
    const std::string jan = ja_names(ja);
    for (std::size_t n = 0; n < S; ++n)
      for (std::size_t jo = 0; jo < JO; ++jo) {
        const double p = m.obs_prob(ja, n, jo);
        if (p > 0.0) out << "O: " << jan << " : " << m.states[n] << " : " << jo_names(jo) << " : " << format_prob(p) << "\n";
      }
  }
  if (m.has_common_channel()) {
    for (std::size_t ja = 0; ja < JA; ++ja) {
      const std::string jan = ja_names(ja);
      for (std::size_t n = 0; n < S; ++n)
        for (std::size_t z = 0; z < m.num_common_obs(); ++z) {
          const double p = m.common_prob(ja, n, z);
          if (p > 0.0) out << "Zc: " << jan << " : " << m.states[n] << " : " << m.common_obs[z] << " : " << format_prob(p) << "\n";
        }
    }
  }
  for (std::size_t ja = 0; ja < JA; ++ja) {
    const std::string jan = ja_names(ja);
    for (std::size_t s = 0; s < S; ++s) {
      const double r = m.reward_of(s, ja);
      if (r != 0.0) out << "R: " << jan << " : " << m.states[s] << " : * : * : " << format_exact(r) << "\n";
    }
  }
  return out.str();
}

std::vector<std::string> validate(const EnvModel& m) {
  std::vector<std::string> v;
  const std::size_t S = m.num_states();
  if (m.num_agents == 0) v.push_back("model has no agents");
  if (S == 0) v.push_back("model has no states");
  if (m.actions.size() != m.num_agents) v.push_back("action alphabets do not match the agent count");
  if (m.private_obs.size() != m.num_agents) v.push_back("observation alphabets do not match the agent count");
  for (std::size_t i = 0; i < m.actions.size(); ++i)
    if (m.actions[i].empty()) v.push_back("agent " + std::to_string(i) + " has no actions");
  for (std::size_t i = 0; i < m.private_obs.size(); ++i)
    if (m.private_obs[i].empty()) v.push_back("agent " + std::to_string(i) + " has no observations");
  if (m.horizon < 1) v.push_back("horizon must be at least 1");
  if (!v.empty()) return v;

  const std::size_t JA = m.num_joint_actions(), JO = m.num_joint_obs(), Z = m.num_common_obs();
  if (m.transition.size() != S * JA) v.push_back("transition table has the wrong size");
  if (m.observation.size() != JA * S * JO) v.push_back("observation table has the wrong size");
  if (m.common.size() != JA * S * Z) v.push_back("common observation table has the wrong size");
  if (m.reward.size() != S * JA) v.push_back("reward table has the wrong size");
  if (m.start.size() != S) v.push_back("start distribution has the wrong size");
  if (!v.empty()) return v;

  auto bad = [](double p) { return !std::isfinite(p) || p < 0.0 || p > 1.0 + kRowTolerance; };
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t ja = 0; ja < JA; ++ja) {
      double total = 0.0;
      bool ok = true;
      for (const auto& o : m.transitions(s, ja)) {
        if (o.next_state < 0 || static_cast<std::size_t>(o.next_state) >= S) {
          v.push_back("T row (s=" + std::to_string(s) + ", ja=" + std::to_string(ja) + ") has next-state index " +
                      std::to_string(o.next_state) + " out of range");
          ok = false;
        }
        if (bad(o.prob)) ok = false;
        total += o.prob;
      }
      if (ok && std::abs(total - 1.0) > kRowTolerance)
        v.push_back("T row (s=" + std::to_string(s) + ", ja=" + std::to_string(ja) + ") sums to " + std::to_string(total));
      else if (!ok && std::abs(total - 1.0) <= kRowTolerance)
        v.push_back("T row (s=" + std::to_string(s) + ", ja=" + std::to_string(ja) + ") has invalid entries");
    }
  auto rows = [&](const std::vector<double>& table, std::size_t width, const char* name) {
    for (std::size_t ja = 0; ja < JA; ++ja)
      for (std::size_t n = 0; n < S; ++n) {
        double total = 0.0;
        bool ok = true;
        for (std::size_t o = 0; o < width; ++o) {
          const double p = table[(ja * S + n) * width + o];
          if (bad(p)) ok = false;
          total += p;
        }
        if (!ok || std::abs(total - 1.0) > kRowTolerance)
          v.push_back(std::string(name) + " row (ja=" + std::to_string(ja) + ", s'=" + std::to_string(n) + ") sums to " +
                      std::to_string(total) + (ok ? "" : " with invalid entries"));
      }
  };
  rows(m.observation, JO, "O");
  rows(m.common, Z, "Zc");
  double total = 0.0;
  bool ok = true;
  for (double p : m.start) {
    if (bad(p)) ok = false;
    total += p;
  }
  if (!ok || std::abs(total - 1.0) > kRowTolerance) v.push_back("start distribution sums to " + std::to_string(total));
  for (double r : m.reward)
    if (!std::isfinite(r)) {
      v.push_back("reward table has non-finite entries");
      break;
    }
  return v;
}

}  // namespace decembed
