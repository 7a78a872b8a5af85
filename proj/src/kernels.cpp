#include "pe/kernels.hpp"

namespace pe::kernels {

namespace {
int g_workers = 1;
}

int workers() { return g_workers; }

void set_workers(int n) { g_workers = n < 1 ? 1 : n; }

}  // namespace pe::kernels
