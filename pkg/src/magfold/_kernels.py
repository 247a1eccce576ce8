"""Numeric kernels for the hinge-chain energy model.

Everything in this module is written in a numba-compilable subset of
numpy (explicit loops, preallocated arrays, positional arguments) and is
either compiled or left as-is depending on :mod:`magfold.backend`.

Status codes returned by the energy/gradient kernels:
    0  ok
    1  end-magnet pair closer than the separation guard
    2  an end magnet and an external-magnet dipole closer than the guard
"""

import numpy as np

from .backend import maybe_jit

MU0 = 4.0e-7 * np.pi
MU0_OVER_4PI = 1.0e-7


def _roty(theta):
    c = np.cos(theta)
    s = np.sin(theta)
    R = np.empty((3, 3))
    R[0, 0] = c
    R[0, 1] = 0.0
    R[0, 2] = s
    R[1, 0] = 0.0
    R[1, 1] = 1.0
    R[1, 2] = 0.0
    R[2, 0] = -s
    R[2, 1] = 0.0
    R[2, 2] = c
    return R


def _axis_rot(axis_index, theta):
    """Rotation about a world coordinate axis (0=x, 1=y, 2=z)."""
    c = np.cos(theta)
    s = np.sin(theta)
    R = np.zeros((3, 3))
    if axis_index == 0:
        R[0, 0] = 1.0
        R[1, 1] = c
        R[1, 2] = -s
        R[2, 1] = s
        R[2, 2] = c
    elif axis_index == 1:
        R[0, 0] = c
        R[0, 2] = s
        R[1, 1] = 1.0
        R[2, 0] = -s
        R[2, 2] = c
    else:
        R[0, 0] = c
        R[0, 1] = -s
        R[1, 0] = s
        R[1, 1] = c
        R[2, 2] = 1.0
    return R


def fk_chain(base_pos, base_R, hinges, link_len):
    """Forward kinematics of the link chain.

    Hinge i joins links i and i+1 and rotates about the local y axis of
    link i.  Returns the n+1 joint points and the n link rotation matrices.
    """
    n = hinges.shape[0] + 1
    pts = np.empty((n + 1, 3))
    rots = np.empty((n, 3, 3))
    pts[0] = base_pos
    rots[0] = base_R
    for i in range(n):
        # advance along the link axis (body x)
        for k in range(3):
            pts[i + 1, k] = pts[i, k] + rots[i, :, 0][k] * link_len
        if i < n - 1:
            rots[i + 1] = rots[i] @ _roty(hinges[i])
    return pts, rots


def magnet_world(base_pos, base_R, hinges, link_len, mount_pos, mount_m):
    """World positions and moments of the two end magnets.

    mount_pos/mount_m are (2,3) body-frame quantities: row 0 lives on the
    first link, row 1 on the last.
    """
    pts, rots = fk_chain(base_pos, base_R, hinges, link_len)
    n = rots.shape[0]
    pos = np.empty((2, 3))
    mom = np.empty((2, 3))
    pos[0] = pts[0] + rots[0] @ mount_pos[0]
    mom[0] = rots[0] @ mount_m[0]
    pos[1] = pts[n - 1] + rots[n - 1] @ mount_pos[1]
    mom[1] = rots[n - 1] @ mount_m[1]
    return pts, pos, mom


def pair_energy_k(p1, m1, p2, m2):
    r0 = p2[0] - p1[0]
    r1 = p2[1] - p1[1]
    r2 = p2[2] - p1[2]
    d2 = r0 * r0 + r1 * r1 + r2 * r2
    d = np.sqrt(d2)
    ur0 = r0 / d
    ur1 = r1 / d
    ur2 = r2 / d
    mm = m1[0] * m2[0] + m1[1] * m2[1] + m1[2] * m2[2]
    m1r = m1[0] * ur0 + m1[1] * ur1 + m1[2] * ur2
    m2r = m2[0] * ur0 + m2[1] * ur1 + m2[2] * ur2
    return MU0_OVER_4PI * (mm - 3.0 * m1r * m2r) / (d * d2)


def chain_energy(
    base_pos,
    base_R,
    hinges,
    link_len,
    stiff,
    rest,
    mount_pos,
    mount_m,
    epm,
    plates_on,
    plate_axis,
    plate_lo,
    plate_hi,
    plate_k,
    contact_dist,
    contact_k,
    gravity,
    link_mass,
    min_sep,
    sub_off,
    wall_t,
):
    """Total energy of a chain configuration, split into four terms.

    Returns (status, e) with e = [elastic, magnet_pair, magnet_external,
    external].  ``epm`` is a (K, 6) array of world dipoles (position,
    moment); K may be zero.  ``sub_off`` is a (2, S) array of signed offsets
    along each end magnet's moment axis: every end magnet is modeled as S
    equal sub-dipoles spread over its length, which captures the near-field
    preference of long magnets for untilted side-by-side latching.
    ``wall_t`` is a (W,) array of arc positions along each end link; steric
    contact acts between spheres centered at those points on the first and
    last links, so the rigid end panels (with their embedded magnets) cannot
    interpenetrate and cannot dock magnet-tip to magnet-tip.
    """
    e = np.zeros(4)
    H = hinges.shape[0]
    for i in range(H):
        d = hinges[i] - rest[i]
        e[0] += 0.5 * stiff[i] * d * d

    pts, pos, mom = magnet_world(base_pos, base_R, hinges, link_len, mount_pos, mount_m)

    dx = pos[1, 0] - pos[0, 0]
    dy = pos[1, 1] - pos[0, 1]
    dz = pos[1, 2] - pos[0, 2]
    sep = np.sqrt(dx * dx + dy * dy + dz * dz)
    if sep < min_sep:
        return 1, e

    S = sub_off.shape[1]
    axes = np.empty((2, 3))
    for i in range(2):
        mn = np.sqrt(mom[i, 0] ** 2 + mom[i, 1] ** 2 + mom[i, 2] ** 2)
        if mn > 0.0:
            axes[i] = mom[i] / mn
        else:
            axes[i] = 0.0
    subs = np.empty((2, S, 3))
    for i in range(2):
        for a in range(S):
            subs[i, a] = pos[i] + sub_off[i, a] * axes[i]
    w = 1.0 / S
    for a in range(S):
        for b in range(S):
            r0 = subs[1, b, 0] - subs[0, a, 0]
            r1 = subs[1, b, 1] - subs[0, a, 1]
            r2 = subs[1, b, 2] - subs[0, a, 2]
            d = np.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
            if d < min_sep:
                return 1, e
            e[1] += w * w * pair_energy_k(subs[0, a], mom[0], subs[1, b], mom[1])

    for j in range(epm.shape[0]):
        ep = epm[j, 0:3]
        em = epm[j, 3:6]
        for i in range(2):
            for a in range(S):
                rx = subs[i, a, 0] - ep[0]
                ry = subs[i, a, 1] - ep[1]
                rz = subs[i, a, 2] - ep[2]
                if np.sqrt(rx * rx + ry * ry + rz * rz) < min_sep:
                    return 2, e
                e[2] += w * pair_energy_k(ep, em, subs[i, a], mom[i])

    # steric contact between the rigid end panels: spheres along the first
    # and last link midlines; the quartic core diverges faster than the
    # 1/r^3 magnetic attraction, so the wall cannot be punched through
    n_links = hinges.shape[0] + 1
    W = wall_t.shape[0]
    for a in range(W):
        for b in range(W):
            d2w = 0.0
            for k in range(3):
                pa = pts[0, k] + (pts[1, k] - pts[0, k]) / link_len * wall_t[a]
                pb = pts[n_links - 1, k] + (
                    pts[n_links, k] - pts[n_links - 1, k]
                ) / link_len * wall_t[b]
                d2w += (pb - pa) * (pb - pa)
            dw = np.sqrt(d2w)
            if dw < min_sep:
                dw = min_sep
            if dw < contact_dist:
                x = contact_dist / dw - 1.0
                e[3] += contact_k * x * x * x * x

    if plates_on == 1:
        n_pts = pts.shape[0]
        for i in range(n_pts):
            s = (
                pts[i, 0] * plate_axis[0]
                + pts[i, 1] * plate_axis[1]
                + pts[i, 2] * plate_axis[2]
            )
            # independent one-sided penalties; when the plates overlap
            # (lo > hi) both act and the sheet is centered symmetrically
            if s < plate_lo:
                v = plate_lo - s
                e[3] += 0.5 * plate_k * v * v
            if s > plate_hi:
                v = s - plate_hi
                e[3] += 0.5 * plate_k * v * v

    gnorm = gravity[0] * gravity[0] + gravity[1] * gravity[1] + gravity[2] * gravity[2]
    if gnorm > 0.0:
        n = pts.shape[0] - 1
        for i in range(n):
            # potential of the link midpoint
            mx = 0.5 * (pts[i, 0] + pts[i + 1, 0])
            my = 0.5 * (pts[i, 1] + pts[i + 1, 1])
            mz = 0.5 * (pts[i, 2] + pts[i + 1, 2])
            e[3] -= link_mass * (gravity[0] * mx + gravity[1] * my + gravity[2] * mz)

    return 0, e


def chain_grad(
    base_pos,
    base_R,
    hinges,
    link_len,
    stiff,
    rest,
    mount_pos,
    mount_m,
    epm,
    plates_on,
    plate_axis,
    plate_lo,
    plate_hi,
    plate_k,
    contact_dist,
    contact_k,
    gravity,
    link_mass,
    min_sep,
    sub_off,
    wall_t,
    trans_step,
    rot_step,
):
    """Central-difference gradient of the total energy over the generalized
    coordinates [base position (3), base world-axis rotation (3), hinges (H)].

    Returns (status, grad).
    """
    H = hinges.shape[0]
    g = np.zeros(6 + H)
    for k in range(3):
        p = base_pos.copy()
        p[k] = base_pos[k] + trans_step
        s1, ep_ = chain_energy(
            p, base_R, hinges, link_len, stiff, rest, mount_pos, mount_m, epm,
            plates_on, plate_axis, plate_lo, plate_hi, plate_k,
            contact_dist, contact_k, gravity, link_mass, min_sep, sub_off, wall_t,
        )
        p[k] = base_pos[k] - trans_step
        s2, em_ = chain_energy(
            p, base_R, hinges, link_len, stiff, rest, mount_pos, mount_m, epm,
            plates_on, plate_axis, plate_lo, plate_hi, plate_k,
            contact_dist, contact_k, gravity, link_mass, min_sep, sub_off, wall_t,
        )
        if s1 != 0:
            return s1, g
        if s2 != 0:
            return s2, g
        g[k] = (ep_.sum() - em_.sum()) / (2.0 * trans_step)

    for k in range(3):
        Rp = _axis_rot(k, rot_step) @ base_R
        s1, ep_ = chain_energy(
            base_pos, Rp, hinges, link_len, stiff, rest, mount_pos, mount_m, epm,
            plates_on, plate_axis, plate_lo, plate_hi, plate_k,
            contact_dist, contact_k, gravity, link_mass, min_sep, sub_off, wall_t,
        )
        Rm = _axis_rot(k, -rot_step) @ base_R
        s2, em_ = chain_energy(
            base_pos, Rm, hinges, link_len, stiff, rest, mount_pos, mount_m, epm,
            plates_on, plate_axis, plate_lo, plate_hi, plate_k,
            contact_dist, contact_k, gravity, link_mass, min_sep, sub_off, wall_t,
        )
        if s1 != 0:
            return s1, g
        if s2 != 0:
            return s2, g
        g[3 + k] = (ep_.sum() - em_.sum()) / (2.0 * rot_step)

    for k in range(H):
        h = hinges.copy()
        h[k] = hinges[k] + rot_step
        s1, ep_ = chain_energy(
            base_pos, base_R, h, link_len, stiff, rest, mount_pos, mount_m, epm,
            plates_on, plate_axis, plate_lo, plate_hi, plate_k,
            contact_dist, contact_k, gravity, link_mass, min_sep, sub_off, wall_t,
        )
        h[k] = hinges[k] - rot_step
        s2, em_ = chain_energy(
            base_pos, base_R, h, link_len, stiff, rest, mount_pos, mount_m, epm,
            plates_on, plate_axis, plate_lo, plate_hi, plate_k,
            contact_dist, contact_k, gravity, link_mass, min_sep, sub_off, wall_t,
        )
        if s1 != 0:
            return s1, g
        if s2 != 0:
            return s2, g
        g[6 + k] = (ep_.sum() - em_.sum()) / (2.0 * rot_step)

    return 0, g


fk_chain = maybe_jit(fk_chain)
magnet_world = maybe_jit(magnet_world)
pair_energy_k = maybe_jit(pair_energy_k)
chain_energy = maybe_jit(chain_energy)
chain_grad = maybe_jit(chain_grad)
_roty = maybe_jit(_roty)
_axis_rot = maybe_jit(_axis_rot)
