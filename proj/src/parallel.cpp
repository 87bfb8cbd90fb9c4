#include "metaimpact/parallel.hpp"

#include <omp.h>

namespace metaimpact::parallel {
namespace {
int g_default_workers = 0;
}

void set_workers(int n) {
  if (g_default_workers == 0) g_default_workers = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_workers);
}

int workers() { return omp_get_max_threads(); }

}  // namespace metaimpact::parallel
