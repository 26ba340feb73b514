#include "crossbar/gemm.hpp"

#ifdef CROSSBAR_USE_CBLAS
extern "C" void openblas_set_num_threads(int);
#endif

namespace crossbar {

void set_blas_threads(int n) {
#ifdef CROSSBAR_USE_CBLAS
    openblas_set_num_threads(n > 0 ? n : 1);
#else
    (void)n;
#endif
}

}  // namespace crossbar
