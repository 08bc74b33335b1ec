#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "grab/error.hpp"
#include "grab/temporal/abts.hpp"

namespace grab::temporal {
namespace {

std::string Trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::pair<std::string, std::string> SplitQuery(std::string_view text, std::optional<std::size_t> split_hint) {
  if (Trim(text).empty()) throw Error(ErrorCode::kInvalidInput, "query text is empty");
  if (split_hint) {
    const std::size_t at = std::min(*split_hint, text.size());
    auto start = Trim(text.substr(0, at));
    auto end = Trim(text.substr(at));
    if (start.empty()) start = end;
    if (end.empty()) end = start;
    return {std::move(start), std::move(end)};
  }
  // Candidate cuts: just after a terminator that is followed by whitespace.
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      if (!Trim(text.substr(i + 1)).empty()) cuts.push_back(i + 1);
    }
  }
  if (cuts.empty()) {
    auto whole = Trim(text);
    return {whole, whole};
  }
  const auto mid = static_cast<long long>(text.size() / 2);
  std::size_t best = cuts.front();
  for (std::size_t c : cuts) {
    if (std::llabs(static_cast<long long>(c) - mid) < std::llabs(static_cast<long long>(best) - mid)) best = c;
  }
  return {Trim(text.substr(0, best)), Trim(text.substr(best))};
}

}  // namespace grab::temporal
