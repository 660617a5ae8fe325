#pragma once

#include "tnc/circuit.hpp"
#include "tnc/contract.hpp"
#include "tnc/contraction_tree.hpp"
#include "tnc/cost_model.hpp"
#include "tnc/errors.hpp"
#include "tnc/executor.hpp"
#include "tnc/index.hpp"
#include "tnc/network.hpp"
#include "tnc/permutation.hpp"
#include "tnc/rational.hpp"
#include "tnc/reuse.hpp"
#include "tnc/schedule.hpp"
#include "tnc/slicer.hpp"
#include "tnc/tensor.hpp"
#include "tnc/tensor_io.hpp"
