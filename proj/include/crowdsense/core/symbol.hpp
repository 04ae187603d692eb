#pragma once

#include <compare>
#include <functional>
#include <string>
#include <string_view>

namespace crowdsense {

/// Interned string. Equal text always yields the same Symbol, so equality is a
/// pointer compare. Interned storage lives for the whole process and is never
/// mutated, which makes Symbols safe to read from any thread.
class Symbol {
public:
  Symbol();
  static Symbol intern(std::string_view text);

  const std::string &str() const { return *text_; }
  std::string_view view() const { return *text_; }
  bool empty() const { return text_->empty(); }

  bool operator==(const Symbol &other) const { return text_ == other.text_; }
  std::strong_ordering operator<=>(const Symbol &other) const {
    if (text_ == other.text_) return std::strong_ordering::equal;
    return *text_ <=> *other.text_;
  }

  std::size_t hash() const { return std::hash<const void *>{}(text_); }

private:
  explicit Symbol(const std::string *text) : text_(text) {}
  const std::string *text_;
};

struct SymbolHasher {
  std::size_t operator()(const Symbol &s) const noexcept { return s.hash(); }
};

} // namespace crowdsense
