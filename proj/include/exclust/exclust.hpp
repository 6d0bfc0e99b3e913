#ifndef EXCLUST_EXCLUST_HPP
#define EXCLUST_EXCLUST_HPP

#include "exclust/core.hpp"
#include "exclust/error.hpp"
#include "exclust/estimators.hpp"
#include "exclust/experiments.hpp"
#include "exclust/models.hpp"
#include "exclust/parallel.hpp"
#include "exclust/quadrature.hpp"
#include "exclust/rng.hpp"
#include "exclust/theory.hpp"

#endif  // EXCLUST_EXCLUST_HPP
