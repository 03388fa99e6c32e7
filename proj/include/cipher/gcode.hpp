#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace cipher::gcode {

// Canonical parameter order: X Y Z E F S T P, then any other letter
// alphabetically.
int parameter_rank(char letter);

struct ParamOrder {
  bool operator()(char a, char b) const { return parameter_rank(a) < parameter_rank(b); }
};

using Params = std::map<char, double, ParamOrder>;

struct Command {
  char letter = 'G';  // 'G' or 'M'
  int number = 0;
  Params params;
  std::optional<std::string> comment;

  std::string name() const;  // "M221"
  bool has(char p) const { return params.count(p) != 0; }
  std::optional<double> get(char p) const;

  friend bool operator==(const Command&, const Command&) = default;
};

Command make_command(char letter, int number, Params params = {});

struct Blank {
  friend bool operator==(const Blank&, const Blank&) = default;
};
struct CommentOnly {
  std::string text;
  friend bool operator==(const CommentOnly&, const CommentOnly&) = default;
};

using LineResult = std::variant<Command, Blank, CommentOnly>;

enum class ParseErrorKind { MalformedParameter, UnknownLetter, DuplicateParameter, MalformedNumber };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, const std::string& what);
  ParseErrorKind kind() const { return kind_; }
  // 1-based; 0 when parsing a single line outside a program.
  std::size_t line() const { return line_; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
};

LineResult parse_line(std::string_view line);

struct Program {
  std::vector<Command> commands;
  std::string source_name;

  std::size_t size() const { return commands.size(); }
  bool empty() const { return commands.empty(); }
  friend bool operator==(const Program&, const Program&) = default;
};

Program parse_program(std::string_view text, std::string source_name = {});
Program load_program(const std::string& path);

std::string serialize_command(const Command& cmd);
std::string serialize_program(const Program& prog);

// ---------------------------------------------------------------------------
// Codebook

struct CommandDescriptor {
  std::string name;
  std::string brief;
  std::string url;
  std::string usage_notes;
  // Parameter letters the command accepts / requires. Empty `params` means
  // any canonical letter is accepted.
  std::string params;
  std::string required;
  std::optional<Eigen::VectorXd> embedding;
};

struct Codebook {
  std::map<std::string, CommandDescriptor> entries;
  std::vector<std::string> load_warnings;

  const CommandDescriptor* find(const std::string& name) const;
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

class CodebookError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_command_name(std::string_view name);

Codebook parse_codebook(std::string_view json_text);
Codebook load_codebook(const std::string& path);

// Built-in descriptors for the fixed dialect (G0 G1 G28 G92 M104 M106 M109
// M220 M221). These validate whether or not the codebook lists them.
const std::vector<CommandDescriptor>& dialect();
const CommandDescriptor* dialect_find(const std::string& name);

// ---------------------------------------------------------------------------
// Static validation

enum class IssueKind {
  UnknownCommand,
  MissingParameter,
  OutOfDialectParameter,
  NonFiniteValue,
  NegativeZ,
  DecreasingZ,
};

struct Issue {
  std::size_t index;  // command index in the program
  IssueKind kind;
  std::string message;
  friend bool operator==(const Issue&, const Issue&) = default;
};

struct ValidationReport {
  std::vector<Issue> issues;
  bool ok() const { return issues.empty(); }
  std::size_t count(IssueKind kind) const;
  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

const char* to_string(IssueKind kind);

ValidationReport validate_program(const Program& prog, const Codebook& codebook);

}  // namespace cipher::gcode
