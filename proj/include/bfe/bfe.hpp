#pragma once

#include "bfe/core.hpp"
#include "bfe/mesh.hpp"
#include "bfe/mesh_io.hpp"
#include "bfe/kernel.hpp"
#include "bfe/boundary_ops.hpp"
#include "bfe/constitutive.hpp"
#include "bfe/interior_fem.hpp"
#include "bfe/norms.hpp"
#include "bfe/coupled_solver.hpp"
#include "bfe/cq.hpp"
#include "bfe/field_eval.hpp"
#include "bfe/verify.hpp"
