#pragma once

#include "csi_sentry/anomaly.hpp"
#include "csi_sentry/classify.hpp"
#include "csi_sentry/dsp.hpp"
#include "csi_sentry/error.hpp"
#include "csi_sentry/store.hpp"
#include "csi_sentry/synth.hpp"
#include "csi_sentry/transport.hpp"
#include "csi_sentry/wire.hpp"
