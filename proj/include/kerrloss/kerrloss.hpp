#pragma once

#include "core.hpp"
#include "fock_basis.hpp"
#include "specfun.hpp"
#include "superops.hpp"
#include "spectral.hpp"
#include "evolution.hpp"
#include "oracle.hpp"
#include "noise.hpp"
#include "verify.hpp"
