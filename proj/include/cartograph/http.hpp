#pragma once

// cpp-httplib pulls in <resolv.h>, whose `_res` macro collides with parameter
// names inside Eigen. Nothing here uses the resolver state directly.

#include "httplib.h"

#ifdef _res
#undef _res
#endif
