#include <cstdio>
#include <string>

#include "bvkit/acceptance.hpp"

int main() {
  auto criteria = bvkit::run_acceptance();
  int failed = 0;
  for (const auto& c : criteria) {
    std::string detail;
    for (const auto& k : c.checks) {
      if (k.pass) continue;
      if (!detail.empty()) detail += "; ";
      detail += k.name + " residual " + bvkit::accept::fmt(k.residual) + " > " + bvkit::accept::fmt(k.tolerance);
      if (!k.detail.empty()) detail += " (" + k.detail + ")";
    }
    std::printf("[%s] criterion %2d: %s (%zu checks, %.2f s)%s%s\n", c.pass() ? "PASS" : "FAIL", c.id, c.title.c_str(),
                c.checks.size(), c.seconds, detail.empty() ? "" : ": ", detail.c_str());
    if (!c.pass()) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
