#pragma once

#include "awapd/augment.hpp"
#include "awapd/awa.hpp"
#include "awapd/dataset.hpp"
#include "awapd/digest.hpp"
#include "awapd/error.hpp"
#include "awapd/evaluation.hpp"
#include "awapd/features.hpp"
#include "awapd/forest.hpp"
#include "awapd/image.hpp"
#include "awapd/io.hpp"
#include "awapd/parallel.hpp"
#include "awapd/pd_class.hpp"
#include "awapd/peaks.hpp"
#include "awapd/pipeline.hpp"
#include "awapd/png.hpp"
#include "awapd/random.hpp"
#include "awapd/simulator.hpp"
#include "awapd/waveform.hpp"
