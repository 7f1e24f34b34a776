#pragma once

#include "specgap/bounds.hpp"
#include "specgap/errors.hpp"
#include "specgap/explorer.hpp"
#include "specgap/io.hpp"
#include "specgap/intervals.hpp"
#include "specgap/linalg.hpp"
#include "specgap/models.hpp"
#include "specgap/spectral.hpp"
#include "specgap/transport.hpp"
