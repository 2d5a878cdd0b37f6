#pragma once

// Umbrella header for the nvc learned image codec.

#include "nvc/bytes.hpp"
#include "nvc/checkpoint.hpp"
#include "nvc/codec.hpp"
#include "nvc/config.hpp"
#include "nvc/container.hpp"
#include "nvc/conv.hpp"
#include "nvc/dataset.hpp"
#include "nvc/entropy.hpp"
#include "nvc/errors.hpp"
#include "nvc/image.hpp"
#include "nvc/latent.hpp"
#include "nvc/metrics.hpp"
#include "nvc/optim.hpp"
#include "nvc/range_coder.hpp"
#include "nvc/rng.hpp"
#include "nvc/synthetic.hpp"
#include "nvc/tensor.hpp"
#include "nvc/training.hpp"
#include "nvc/vae.hpp"
