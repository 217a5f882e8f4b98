#pragma once

namespace porogen {

/// Global worker cap. 1 (the default) runs everything sequentially, which is
/// the mode that guarantees bit-reproducible outputs; any fixed count is
/// reproducible against itself. Also caps the GEMM backend's thread pool.
int worker_count();
void set_worker_count(int n);

} // namespace porogen
