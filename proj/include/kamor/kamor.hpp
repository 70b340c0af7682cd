#pragma once

#include "kamor/errors.hpp"
#include "kamor/eval.hpp"
#include "kamor/extension.hpp"
#include "kamor/harmonics.hpp"
#include "kamor/io.hpp"
#include "kamor/kam.hpp"
#include "kamor/phantom.hpp"
#include "kamor/pipeline.hpp"
#include "kamor/replacement.hpp"
#include "kamor/sdp.hpp"
#include "kamor/volume.hpp"
