#pragma once

#include <cstdint>
#include <string>

namespace noisyq::audit {

/// Attacker-isolation instrumentation. Blackbox attack code runs inside an
/// AttackerScope; any access to a network tagged as protected while a scope
/// is active is counted as a violation. Networks without a tag are free.

class AttackerScope {
 public:
  AttackerScope();
  ~AttackerScope();
  AttackerScope(const AttackerScope&) = delete;
  AttackerScope& operator=(const AttackerScope&) = delete;
};

bool in_attacker_scope();

/// Called by QNetwork on forward passes and parameter access.
void note_network_access(const std::string& tag);

void set_protected_tag(const std::string& tag);
const std::string& protected_tag();

std::int64_t violation_count();
void reset_violations();

}  // namespace noisyq::audit
