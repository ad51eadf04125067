#ifndef DTCD_DTCD_HPP
#define DTCD_DTCD_HPP

// Everything except raster file I/O (dtcd/raster_io.hpp), which needs OpenCV.

#include "dtcd/checkpoint.hpp"
#include "dtcd/config.hpp"
#include "dtcd/datapipe.hpp"
#include "dtcd/losses.hpp"
#include "dtcd/metrics.hpp"
#include "dtcd/model.hpp"
#include "dtcd/synthetic.hpp"
#include "dtcd/trainer.hpp"

#endif  // DTCD_DTCD_HPP
