#pragma once

#include "dfts_otfs/common.hpp"
#include "dfts_otfs/grid_core.hpp"
#include "dfts_otfs/tx_chain.hpp"
#include "dfts_otfs/pulse_shaping.hpp"
#include "dfts_otfs/papr_analysis.hpp"
#include "dfts_otfs/channel_receiver.hpp"
#include "dfts_otfs/config.hpp"
#include "dfts_otfs/experiment.hpp"
