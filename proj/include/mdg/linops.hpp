// SPDX-License-Identifier: Apache-2.0
//
// mdgsim: mode-dependent loss/gain estimation for coupled SDM links
// Copyright (C) 2026 The mdgsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "mdg/random.hpp"

namespace mdg
{

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Eigen-pairs of a Hermitian matrix, eigenvalues in descending order.
struct SpectralDecomposition
{
    RVector eigenvalues;
    CMatrix eigenvectors; // columns, matching eigenvalues
};

/// Haar-distributed unitary of size dim x dim, deterministic in `seed`.
///
/// QR of an i.i.d. complex standard normal matrix, with the columns of Q
/// rotated by the phases of diag(R) so the result does not inherit the QR
/// sign convention.
CMatrix haar_unitary(int dim, Seed seed);

/// exp(S) for a random skew-Hermitian generator whose entries have standard
/// deviation `kappa`. kappa = 0 gives the identity; large kappa approaches
/// Haar statistics.
CMatrix weak_coupling_unitary(int dim, double kappa, Seed seed);

/// Symmetrizes `m` and returns its eigen-pairs sorted descending.
/// Throws numeric_error on non-finite input and invalid_argument when `m`
/// is not square or departs from Hermitian by more than 1e-9 (relative).
SpectralDecomposition hermitian_spectrum(const CMatrix &m);

struct InverseResult
{
    CMatrix inverse;
    bool regularized = false;
};

/// Exact inverse if s_min > eps * s_max, otherwise the Tikhonov inverse
/// (M^H M + eps^2 s_max^2 I)^-1 M^H. Never throws on finite input.
InverseResult regularized_inverse_ex(const CMatrix &m, double eps = 1e-9);

inline CMatrix regularized_inverse(const CMatrix &m, double eps = 1e-9)
{
    return regularized_inverse_ex(m, eps).inverse;
}

/// max_ij |U U^H - I|_ij
double unitarity_defect(const CMatrix &u);

bool all_finite(const CMatrix &m);

} // namespace mdg
