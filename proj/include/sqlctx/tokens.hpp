#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace sqlctx {

/// ceil(words * 4 / 3), where words are whitespace-delimited.
std::size_t heuristic_token_count(std::string_view text);

/// Pluggable text -> token count function; defaults to the word heuristic.
class TokenCounter {
 public:
  using Fn = std::function<std::size_t(std::string_view)>;

  TokenCounter() : fn_(heuristic_token_count) {}
  explicit TokenCounter(Fn fn) : fn_(std::move(fn)) {}

  std::size_t count(std::string_view text) const { return text.empty() ? 0 : fn_(text); }
  std::size_t operator()(std::string_view text) const { return count(text); }

 private:
  Fn fn_;
};

}  // namespace sqlctx
