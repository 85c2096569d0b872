#pragma once

// Umbrella header.

#include "cure/bundle.hpp"
#include "cure/config.hpp"
#include "cure/editor.hpp"
#include "cure/error.hpp"
#include "cure/npy.hpp"
#include "cure/oracle.hpp"
#include "cure/projector.hpp"
#include "cure/report.hpp"
#include "cure/spectra.hpp"
#include "cure/verify.hpp"
