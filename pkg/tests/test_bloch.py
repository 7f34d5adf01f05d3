import numpy as np
import pytest

from multibang.models import bloch
from multibang.models import _bloch_fallback as fallback


def make_problem(n=200, offsets=(0.0, 2.0), T=0.1):
    targets = [(1.0, 0.0, 0.0)] * len(offsets)
    return bloch.BlochProblem(T=T, n_intervals=n, offsets=offsets, targets=targets)


def random_control(problem, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return scale * rng.normal(size=(problem.n_intervals, 2))


class TestStateSolve:
    def test_norm_preserved(self):
        prob = make_problem(n=400)
        u = random_control(prob, seed=1, scale=3.0)
        traj = bloch.solve_state(prob, u)
        for M in traj.magnetizations:
            norms = np.linalg.norm(M, axis=1)
            assert np.abs(norms - 1.0).max() < 1e-12

    def test_zero_control_rotation(self):
        # with u = 0 the magnetization precesses about e3 and stays at m0
        prob = bloch.BlochProblem(T=0.5, n_intervals=100, offsets=(3.0,),
                                  targets=((0.0, 0.0, 1.0),))
        traj = bloch.solve_state(prob, np.zeros((100, 2)))
        assert np.abs(traj.magnetizations[0] - prob.m0).max() < 1e-12

    def test_crank_nicolson_second_order(self):
        prob_c = make_problem(n=100, offsets=(1.5,), T=0.2)
        u_fn = lambda t: np.column_stack([np.sin(7 * t), np.cos(5 * t)])
        errs = []
        ref_prob = make_problem(n=6400, offsets=(1.5,), T=0.2)
        tm = 0.5 * (ref_prob.times[:-1] + ref_prob.times[1:])
        ref = bloch.solve_state(ref_prob, u_fn(tm)).terminal()
        for n in (100, 200):
            prob = make_problem(n=n, offsets=(1.5,), T=0.2)
            tm = 0.5 * (prob.times[:-1] + prob.times[1:])
            traj = bloch.solve_state(prob, u_fn(tm))
            errs.append(np.linalg.norm(traj.terminal() - ref))
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5

    def test_control_shape_checked(self):
        prob = make_problem(n=50)
        with pytest.raises(ValueError):
            bloch.solve_state(prob, np.zeros((49, 2)))


class TestDerivatives:
    def test_gradient_matches_directional_derivative(self):
        # the adjoint gradient is exact for the discrete objective
        prob = make_problem(n=150)
        u = random_control(prob, seed=2)
        phi = random_control(prob, seed=3)
        traj = bloch.solve_state(prob, u)
        p = bloch.gradient(prob, u, traj)
        dMs = bloch.solve_linearized_state(prob, u, phi, traj)
        exact = sum(
            float(dM[-1] @ (traj.terminal(j) - prob.targets[j]))
            for j, dM in enumerate(dMs)
        )
        assert abs(-prob.inner(p, phi) - exact) < 1e-12 * max(1.0, abs(exact))

    def test_gradient_fd(self):
        prob = make_problem(n=80)
        u = random_control(prob, seed=4)
        phi = random_control(prob, seed=5)
        p = bloch.gradient(prob, u)
        eps = 1e-6
        fd = (
            bloch.objective(prob, u + eps * phi)
            - bloch.objective(prob, u - eps * phi)
        ) / (2 * eps)
        assert abs(-prob.inner(p, phi) - fd) < 1e-6

    def test_hessian_fd(self):
        prob = make_problem(n=80)
        u = random_control(prob, seed=6)
        phi = random_control(prob, seed=7)
        Hphi = bloch.hessian_action(prob, u, phi)
        eps = 1e-5
        gp = bloch.gradient(prob, u + eps * phi)
        gm = bloch.gradient(prob, u - eps * phi)
        fd = -(gp - gm) / (2 * eps)
        assert np.abs(Hphi - fd).max() < 1e-5

    def test_hessian_symmetric(self):
        prob = make_problem(n=120)
        u = random_control(prob, seed=8)
        phi = random_control(prob, seed=9)
        psi = random_control(prob, seed=10)
        traj = bloch.solve_state(prob, u)
        bloch.gradient(prob, u, traj)
        a = prob.inner(bloch.hessian_action(prob, u, phi, traj), psi)
        b = prob.inner(bloch.hessian_action(prob, u, psi, traj), phi)
        assert abs(a - b) < 1e-10 * max(1.0, abs(a))


@pytest.mark.skipif(not bloch.COMPILED_KERNELS, reason="no compiled kernels")
class TestKernelAgreement:
    def test_state_and_gradient_match_fallback(self):
        prob = make_problem(n=150, offsets=(0.0, 4.0))
        u = random_control(prob, seed=11)
        for w in prob.offsets:
            Mc = bloch._kernels.crank_nicolson_state(
                u, w, prob.dt, prob.scale, prob.m0)
            Mf = fallback.crank_nicolson_state(u, w, prob.dt, prob.scale, prob.m0)
            assert np.abs(np.asarray(Mc) - Mf).max() < 1e-14
            tgt = prob.targets[0]
            Pc, gc = bloch._kernels.adjoint_gradient(
                u, w, prob.dt, prob.scale, np.asarray(Mc), tgt)
            Pf, gf = fallback.adjoint_gradient(u, w, prob.dt, prob.scale, Mf, tgt)
            assert np.abs(np.asarray(Pc) - Pf).max() < 1e-14
            assert np.abs(np.asarray(gc) - gf).max() < 1e-14


class TestInterchange:
    def test_from_config(self):
        prob = bloch.BlochProblem.from_config(
            {"T": 2.0, "N_u": 10, "offsets": [0.0, 1.0],
             "targets": [[1, 0, 0], [0, 1, 0]]}
        )
        assert prob.n_intervals == 10 and prob.dt == pytest.approx(0.2)

    def test_csv_output(self):
        prob = make_problem(n=5, offsets=(0.0,))
        u = np.ones((5, 2))
        csv = bloch.control_csv(prob, u)
        assert csv.startswith("t,u1,u2")
        assert len(csv.strip().split("\n")) == 6
        traj = bloch.solve_state(prob, u)
        tcsv = bloch.trajectory_csv(prob, traj)
        assert len(tcsv.strip().split("\n")) == 7
