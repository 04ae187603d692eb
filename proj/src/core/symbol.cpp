#include "crowdsense/core/symbol.hpp"

#include <mutex>
#include <shared_mutex>
#include <unordered_set>

namespace crowdsense {

namespace {

struct SymbolTable {
  std::shared_mutex mutex;
  // Node-based container: element addresses stay valid across rehashing.
  std::unordered_set<std::string> strings;
};

SymbolTable &table() {
  static SymbolTable t;
  return t;
}

} // namespace

Symbol::Symbol() : Symbol(intern("")) {}

Symbol Symbol::intern(std::string_view text) {
  SymbolTable &t = table();
  const std::string key(text);
  {
    std::shared_lock lock(t.mutex);
    if (auto it = t.strings.find(key); it != t.strings.end()) {
      return Symbol(&*it);
    }
  }
  std::unique_lock lock(t.mutex);
  auto [it, inserted] = t.strings.insert(key);
  return Symbol(&*it);
}

} // namespace crowdsense
