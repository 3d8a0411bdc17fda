#pragma once

// Sampling primitives and analytic moment functions.

#include "fatreat/stats/distributions.hpp"
#include "fatreat/stats/hpd.hpp"
#include "fatreat/stats/normal.hpp"
#include "fatreat/stats/random_stream.hpp"
#include "fatreat/stats/truncated_normal.hpp"
