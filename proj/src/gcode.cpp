#include "cipher/gcode.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "cipher/text.hpp"

namespace cipher::gcode {

namespace {

constexpr std::string_view kCanonicalOrder = "XYZEFSTP";

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t'; }

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

}  // namespace

int parameter_rank(char letter) {
  auto pos = kCanonicalOrder.find(letter);
  if (pos != std::string_view::npos) return static_cast<int>(pos);
  return 16 + (letter - 'A');
}

std::string Command::name() const { return std::string(1, letter) + std::to_string(number); }

std::optional<double> Command::get(char p) const {
  auto it = params.find(p);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

Command make_command(char letter, int number, Params params) {
  Command c;
  c.letter = letter;
  c.number = number;
  c.params = std::move(params);
  return c;
}

ParseError::ParseError(ParseErrorKind kind, std::size_t line, const std::string& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
      kind_(kind),
      line_(line) {}

LineResult parse_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);

  std::optional<std::string> comment;
  if (auto semi = line.find(';'); semi != std::string_view::npos) {
    comment = std::string(trim(line.substr(semi + 1)));
    line = line.substr(0, semi);
  }
  line = trim(line);
  if (line.empty()) {
    if (comment) return CommentOnly{*comment};
    return Blank{};
  }

  std::size_t i = 0;
  const std::size_t n = line.size();

  Command cmd;
  cmd.letter = upper(line[i]);
  if (cmd.letter != 'G' && cmd.letter != 'M') {
    throw ParseError(ParseErrorKind::UnknownLetter, 0,
                     "unknown command letter '" + std::string(1, line[i]) + "'");
  }
  ++i;
  std::size_t start = i;
  while (i < n && is_digit(line[i])) ++i;
  if (i == start || (i < n && !is_space(line[i]) && !std::isalpha(static_cast<unsigned char>(line[i])))) {
    throw ParseError(ParseErrorKind::MalformedNumber, 0,
                     "malformed command number in '" + std::string(line) + "'");
  }
  {
    auto [p, ec] = std::from_chars(line.data() + start, line.data() + i, cmd.number);
    if (ec != std::errc{}) {
      throw ParseError(ParseErrorKind::MalformedNumber, 0, "command number out of range");
    }
  }

  while (true) {
    while (i < n && is_space(line[i])) ++i;
    if (i >= n) break;
    char raw = line[i];
    if (!std::isalpha(static_cast<unsigned char>(raw))) {
      throw ParseError(ParseErrorKind::MalformedParameter, 0,
                       "expected parameter letter, got '" + std::string(1, raw) + "'");
    }
    char letter = upper(raw);
    if (letter == 'G' || letter == 'M') {
      throw ParseError(ParseErrorKind::MalformedParameter, 0,
                       "second command word '" + std::string(1, raw) + "' on one line");
    }
    ++i;
    std::size_t vstart = i;
    if (i < n && (line[i] == '+' || line[i] == '-')) ++i;
    std::size_t digits = 0;
    while (i < n && is_digit(line[i])) ++i, ++digits;
    if (i < n && line[i] == '.') {
      ++i;
      while (i < n && is_digit(line[i])) ++i, ++digits;
    }
    bool terminated = i >= n || is_space(line[i]) || std::isalpha(static_cast<unsigned char>(line[i]));
    if (digits == 0 || !terminated) {
      throw ParseError(ParseErrorKind::MalformedParameter, 0,
                       "non-numeric value for parameter " + std::string(1, letter));
    }
    std::string_view text = line.substr(vstart, i - vstart);
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value,
                                   std::chars_format::fixed);
    if (ec != std::errc{} || p != text.data() + text.size() || !std::isfinite(value)) {
      throw ParseError(ParseErrorKind::MalformedParameter, 0,
                       "unparseable value for parameter " + std::string(1, letter));
    }
    if (!cmd.params.emplace(letter, value).second) {
      throw ParseError(ParseErrorKind::DuplicateParameter, 0,
                       "duplicate parameter " + std::string(1, letter));
    }
  }
  cmd.comment = std::move(comment);
  return cmd;
}

Program parse_program(std::string_view text, std::string source_name) {
  Program prog;
  prog.source_name = std::move(source_name);
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    LineResult r;
    try {
      r = parse_line(line);
    } catch (const ParseError& e) {
      throw ParseError(e.kind(), line_no, e.what());
    }
    if (auto* c = std::get_if<Command>(&r)) prog.commands.push_back(std::move(*c));
  }
  return prog;
}

Program load_program(const std::string& path) { return parse_program(read_file(path), path); }

std::string serialize_command(const Command& cmd) {
  std::string out = cmd.name();
  for (const auto& [letter, value] : cmd.params) {
    out += ' ';
    out += letter;
    out += format_real(value);
  }
  if (cmd.comment) {
    out += " ; ";
    out += *cmd.comment;
  }
  return out;
}

std::string serialize_program(const Program& prog) {
  std::string out;
  for (const auto& c : prog.commands) {
    out += serialize_command(c);
    out += '\n';
  }
  return out;
}

}  // namespace cipher::gcode
