#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "decembed/model.hpp"

namespace decembed {

struct DpomdpSource {
  std::string text;
  std::string origin;  ///< file path or an inline label, used in messages
};

enum class ParseErrorKind { syntax, semantic, unsupported_construct };

const char* to_string(ParseErrorKind kind);

/// Positioned parse failure. Line and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string origin, int line, int column, ParseErrorKind kind, std::string message);

  const std::string& origin() const { return origin_; }
  int line() const { return line_; }
  int column() const { return column_; }
  ParseErrorKind kind() const { return kind_; }
  const std::string& message() const { return message_; }

 private:
  std::string origin_;
  int line_;
  int column_;
  ParseErrorKind kind_;
  std::string message_;
};

/// Parses the `.dpomdp` subset used by the bundled benchmarks plus two
/// extensions: `horizon: <T>` and a `common-observations:` section with
/// `Zc: <ja> : <s'> : <z> : <p>` entries. Rewards are collapsed to R(s, ja).
/// Throws ParseError.
EnvModel parse_dpomdp(const DpomdpSource& src);

/// Reads a file and parses it. Throws std::runtime_error when unreadable.
EnvModel load_dpomdp_file(const std::string& path);

/// Text that parse_dpomdp maps back to an equal model.
std::string serialize_dpomdp(const EnvModel& model);

/// Semantic violations, empty for a valid model.
std::vector<std::string> validate(const EnvModel& model);

}  // namespace decembed
