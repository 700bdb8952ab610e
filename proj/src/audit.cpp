#include "noisyq/audit.hpp"

#include <atomic>

namespace noisyq::audit {

namespace {
thread_local int scope_depth = 0;
std::atomic<std::int64_t> violations{0};
std::string protected_tag_value = "target";
}  // namespace

AttackerScope::AttackerScope() { ++scope_depth; }
AttackerScope::~AttackerScope() { --scope_depth; }

bool in_attacker_scope() { return scope_depth > 0; }

void note_network_access(const std::string& tag) {
  if (scope_depth > 0 && !tag.empty() && tag == protected_tag_value) {
    violations.fetch_add(1, std::memory_order_relaxed);
  }
}

void set_protected_tag(const std::string& tag) { protected_tag_value = tag; }
const std::string& protected_tag() { return protected_tag_value; }

std::int64_t violation_count() { return violations.load(); }
void reset_violations() { violations.store(0); }

}  // namespace noisyq::audit
