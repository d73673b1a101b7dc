"""Pure-numpy pointwise kernels; the reference path for the compiled core.

Every array keeps the grid in its trailing axes.  Index conventions:
``g[a, b] = g_{ab̄}``, ``ginv[b, a] = g^{b̄a}``, ``dg[i, j, k] = ∂_i g_{jk̄}``,
``dbg[j, a, q] = ∂_{j̄} g_{aq̄}``, ``ddg[i, j, p, q] = ∂_i∂_{j̄} g_{pq̄}``.
"""

import numpy as np


def herm_inverse_eig(g):
    """Pointwise inverse and global eigenvalue extremes of a Hermitian field.

    Returns ``(ginv, min_eig, max_eig)`` with ``ginv[b, a] = g^{b̄a}``.
    """
    n = g.shape[0]
    grid = g.shape[2:]
    mats = np.moveaxis(g.reshape(n, n, -1), 2, 0)
    eig = np.linalg.eigvalsh(mats)
    inv = np.linalg.inv(mats)
    ginv = np.moveaxis(inv, 0, 2).reshape((n, n) + grid)
    return ginv, float(eig[:, 0].min()), float(eig[:, -1].max())


def chern_bundle(ginv, dg, dbg, ddg):
    """Γ, Ω (expanded form), S, Ric and Q at every grid point."""
    gamma = np.einsum("ijb...,ba...->ija...", dg, ginv)
    # g^{b̄a} ∂_i g_{pb̄} ∂_{j̄} g_{aq̄} = Γ_{ip}^a ∂_{j̄} g_{aq̄}
    omega = np.einsum("ipa...,jaq...->ijpq...", gamma, dbg) - ddg
    s = np.einsum("ba...,abij...->ij...", ginv, omega)
    ric = np.einsum("ba...,ijab...->ij...", ginv, omega)
    tor = dg - np.swapaxes(dg, 0, 1)
    raised = np.einsum("iat...,ts...->ias...", tor, ginv)  # T_{ia}^s
    # Q_{ij̄} = g^{b̄a} T_{ia}^s conj(T_{jbs̄})
    q = np.einsum("ias...,ba...,jbs...->ij...", raised, ginv, np.conj(tor), optimize=True)
    return gamma, omega, s, ric, q
