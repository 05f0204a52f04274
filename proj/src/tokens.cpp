#include "sqlctx/tokens.hpp"

#include <cctype>

namespace sqlctx {

std::size_t heuristic_token_count(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return (words * 4 + 2) / 3;
}

}  // namespace sqlctx
