#pragma once

// Umbrella header for the CPW resonator toolkit.

#include "cpwlab/abcd.hpp"
#include "cpwlab/config.hpp"
#include "cpwlab/constants.hpp"
#include "cpwlab/cpw.hpp"
#include "cpwlab/devices.hpp"
#include "cpwlab/elliptic.hpp"
#include "cpwlab/errors.hpp"
#include "cpwlab/least_squares.hpp"
#include "cpwlab/notch_fit.hpp"
#include "cpwlab/notch_model.hpp"
#include "cpwlab/power_tls.hpp"
#include "cpwlab/records.hpp"
#include "cpwlab/trace.hpp"
