#pragma once

#include "cubere/error.hpp"
#include "cubere/dataset.hpp"
#include "cubere/label_cube.hpp"
#include "cubere/tensor.hpp"
#include "cubere/encoder.hpp"
#include "cubere/scorer.hpp"
#include "cubere/losses.hpp"
#include "cubere/decoder.hpp"
#include "cubere/reference_decode.hpp"
#include "cubere/oracle.hpp"
#include "cubere/evaluator.hpp"
#include "cubere/model.hpp"
#include "cubere/optim.hpp"
#include "cubere/trainer.hpp"
#include "cubere/synthetic.hpp"
