#pragma once

#include "slgraph/errors.hpp"
#include "slgraph/polynomial.hpp"
#include "slgraph/graph_model.hpp"
#include "slgraph/graph_io.hpp"
#include "slgraph/endpoint_analysis.hpp"
#include "slgraph/frobenius.hpp"
#include "slgraph/hamiltonian_flow.hpp"
#include "slgraph/boundary_forms.hpp"
#include "slgraph/secular.hpp"
#include "slgraph/spectral_solver.hpp"
#include "slgraph/weyl_report.hpp"
