#pragma once

#include "isokit/error.hpp"
#include "isokit/linalg.hpp"
#include "isokit/normalizers.hpp"
#include "isokit/isobn.hpp"
#include "isokit/metrics.hpp"
#include "isokit/probe.hpp"
#include "isokit/random.hpp"
#include "isokit/synthgen.hpp"
#include "isokit/io.hpp"
#include "isokit/report.hpp"
