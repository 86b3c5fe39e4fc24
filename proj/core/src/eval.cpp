#include "uniid/config.hpp"
// diagnostics implementation lands with the eval module
