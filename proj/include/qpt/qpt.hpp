#pragma once

#include "qpt/lattice.hpp"
#include "qpt/polynomial.hpp"
#include "qpt/model.hpp"
#include "qpt/vectorfield.hpp"
#include "qpt/resonance.hpp"
#include "qpt/evaluate.hpp"
#include "qpt/solver.hpp"
#include "qpt/msa.hpp"
#include "qpt/io.hpp"
