#pragma once

#include "csi_sentry/classify/dataset.hpp"
#include "csi_sentry/classify/dwt.hpp"
#include "csi_sentry/classify/gnb.hpp"
#include "csi_sentry/classify/lstm.hpp"
#include "csi_sentry/classify/tree.hpp"
