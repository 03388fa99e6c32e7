#pragma once

#include <cmath>
#include <iterator>
#include <random>
#include <string>

#include "cipher/gcode.hpp"

namespace testing_support {

inline std::string data_path(const std::string& name) { return std::string(CIPHER_TEST_DATA) + "/" + name; }
inline std::string repo_data_path(const std::string& name) { return std::string(CIPHER_DATA_DIR) + "/" + name; }

// A random command that the dialect accepts: known name, allowed letters,
// finite values, optional comment.
inline cipher::gcode::Command random_command(std::mt19937_64& rng) {
  struct Spec {
    char letter;
    int number;
    const char* params;
  };
  static const Spec specs[] = {{'G', 0, "XYZEF"}, {'G', 1, "XYZEF"}, {'G', 28, "XYZ"},  {'G', 92, "XYZE"},
                               {'M', 104, "ST"},  {'M', 106, "SP"},  {'M', 109, "ST"}, {'M', 220, "S"},
                               {'M', 221, "ST"}};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(specs) - 1);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> wide(-500.0, 500.0);
  std::uniform_int_distribution<int> decimals(0, 6);
  const Spec& s = specs[pick(rng)];

  cipher::gcode::Params params;
  for (const char* p = s.params; *p; ++p) {
    if (!coin(rng) && !(s.letter == 'M' && *p == 'S')) continue;
    double v = wide(rng);
    int d = decimals(rng);
    if (d < 6) v = std::round(v * std::pow(10.0, d)) / std::pow(10.0, d);
    if (v == 0.0) v = 0.0;  // no negative zero
    params[*p] = v;
  }
  auto cmd = cipher::gcode::make_command(s.letter, s.number, params);
  if (std::bernoulli_distribution(0.2)(rng)) cmd.comment = "note " + std::to_string(rng() % 1000);
  return cmd;
}

}  // namespace testing_support
