#include "cmes/parallel.hpp"

#include <omp.h>

namespace cmes {

int max_threads() { return omp_get_max_threads(); }

}  // namespace cmes
