#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>

#include "audit.hpp"

int main(int argc, char** argv) {
  qresp::testing::Audit audit;
  audit.install();
  doctest::Context ctx(argc, argv);
  const int rc = ctx.run();
  audit.uninstall();
  if (ctx.shouldExit()) return rc;
  std::printf("audit: %ld densities, %ld responses, worst |mean h - 1| = %.3g, worst |mean h_hat| = %.3g\n",
              audit.densities.load(), audit.responses.load(), audit.worst_mass.load(), audit.worst_mean.load());
  if (audit.violations() > 0) {
    std::printf("audit: %d conservation/positivity violations, first: %s\n", audit.violations(),
                audit.first_violation().c_str());
    return rc == 0 ? 1 : rc;
  }
  return rc;
}
