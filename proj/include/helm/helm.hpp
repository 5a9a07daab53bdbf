#pragma once

#include "helm/error.hpp"
#include "helm/network.hpp"
#include "helm/linsolve.hpp"
#include "helm/series.hpp"
#include "helm/pade.hpp"
#include "helm/solver.hpp"
#include "helm/oracle.hpp"
#include "helm/caseio.hpp"
