#include "uniid/config.hpp"
// training pipeline implementation lands with the harness module
