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

#include "mdg/linops.hpp"

#include "mdg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mdg
{

bool all_finite(const CMatrix &m)
{
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag()))
                return false;
    return true;
}

double unitarity_defect(const CMatrix &u)
{
    const CMatrix e = u * u.adjoint() - CMatrix::Identity(u.rows(), u.rows());
    return e.cwiseAbs().maxCoeff();
}

CMatrix haar_unitary(int dim, Seed seed)
{
    require(dim >= 1, "haar_unitary: dim must be >= 1");
    Engine rng(seed);
    CMatrix z(dim, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i)
            z(i, j) = complex_normal(rng);

    Eigen::HouseholderQR<CMatrix> qr(z);
    CMatrix q = qr.householderQ();
    const CMatrix &r = qr.matrixQR();
    for (int j = 0; j < dim; ++j)
    {
        const double mag = std::abs(r(j, j));
        const cdouble phase = mag > 0.0 ? r(j, j) / mag : cdouble(1.0, 0.0);
        q.col(j) *= phase;
    }
    return q;
}

CMatrix weak_coupling_unitary(int dim, double kappa, Seed seed)
{
    require(dim >= 1, "weak_coupling_unitary: dim must be >= 1");
    require(kappa >= 0.0 && std::isfinite(kappa), "weak_coupling_unitary: kappa must be finite and >= 0");
    if (kappa == 0.0)
        return CMatrix::Identity(dim, dim);

    // S = i K with K Hermitian, so exp(S) = Q diag(exp(i mu)) Q^H.
    Engine rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    CMatrix k = CMatrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i)
    {
        k(i, i) = kappa * normal(rng);
        for (int j = i + 1; j < dim; ++j)
        {
            k(i, j) = complex_normal(rng, kappa * kappa);
            k(j, i) = std::conj(k(i, j));
        }
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(k);
    const CMatrix &q = es.eigenvectors();
    CVector phases(dim);
    for (int i = 0; i < dim; ++i)
        phases(i) = std::polar(1.0, es.eigenvalues()(i));
    return q * phases.asDiagonal() * q.adjoint();
}

SpectralDecomposition hermitian_spectrum(const CMatrix &m)
{
    require(m.rows() == m.cols() && m.rows() > 0, "hermitian_spectrum: matrix must be square and non-empty");
    if (!all_finite(m))
        fail(ErrorCode::numeric_error, "hermitian_spectrum: non-finite entries");

    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    require(asym <= 1e-9 * scale, "hermitian_spectrum: matrix is not Hermitian");

    const CMatrix sym = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sym);
    if (es.info() != Eigen::Success)
        fail(ErrorCode::numeric_error, "hermitian_spectrum: eigensolver did not converge");

    // Eigen returns ascending order.
    SpectralDecomposition out;
    out.eigenvalues = es.eigenvalues().reverse();
    out.eigenvectors = es.eigenvectors().rowwise().reverse();
    return out;
}

InverseResult regularized_inverse_ex(const CMatrix &m, double eps)
{
    require(m.rows() == m.cols() && m.rows() > 0, "regularized_inverse: matrix must be square and non-empty");
    require(eps > 0.0, "regularized_inverse: eps must be positive");
    if (!all_finite(m))
        fail(ErrorCode::numeric_error, "regularized_inverse: non-finite entries");

    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector &s = svd.singularValues();
    const double s_max = s(0);
    InverseResult out;
    if (s_max == 0.0)
    {
        out.inverse = CMatrix::Zero(m.rows(), m.cols());
        out.regularized = true;
        return out;
    }

    const double s_min = s(s.size() - 1);
    RVector gain(s.size());
    if (s_min > eps * s_max)
    {
        gain = s.cwiseInverse();
    }
    else
    {
        const double lambda2 = eps * eps * s_max * s_max;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            gain(i) = s(i) / (s(i) * s(i) + lambda2);
        out.regularized = true;
    }
    out.inverse = svd.matrixV() * gain.cast<cdouble>().asDiagonal() * svd.matrixU().adjoint();
    return out;
}

} // namespace mdg
