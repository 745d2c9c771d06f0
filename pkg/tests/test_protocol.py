import numpy as np
import pytest

import paper_tables
from syncopt.errors import NumericalError, ValidationError
from syncopt.numkernel import is_hurwitz
from syncopt.plant import AgentDynamics, LeaderModel
from syncopt.protocol import (
    build_augmented_plant,
    build_transform,
    design_compensator,
    initial_gains,
)
from syncopt.regulator import solve_regulator
from syncopt.topology import build_topology

SINGLE = build_topology(1, [(0, 1)])


class TestDesignCompensator:
    def test_paper_alphas(self, paper_scenario):
        design = design_compensator(paper_scenario.leader, paper_scenario.topology, 1.0)
        assert np.array_equal(design.alphas, paper_tables.ALPHAS)
        assert design.lambda_M == pytest.approx(1.0)

    def test_single_follower(self):
        design = design_compensator(LeaderModel(S=[[0]], w0=[1]), SINGLE, 1.0)
        assert design.alphas[0] == pytest.approx(-1.0)

    def test_arithmetic(self):
        topo = build_topology(3, [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3), (1, 3)])
        design = design_compensator(LeaderModel(S=np.eye(2), w0=[1, 0]), topo, 2.0)
        assert np.allclose(design.alphas, [-3.0, -1.5, -1.0])

    def test_alpha_identity_exact(self, paper_scenario):
        design = design_compensator(paper_scenario.leader, paper_scenario.topology, 1.0)
        d = paper_scenario.topology.in_degrees[1:]
        assert np.abs(design.alphas * d + design.lambda_M + design.r).max() == 0.0

    def test_rejects_nonpositive_r(self, paper_scenario):
        with pytest.raises(ValidationError):
            design_compensator(paper_scenario.leader, paper_scenario.topology, 0.0)


class TestBuildTransform:
    def test_single_follower_trivial(self):
        leader = LeaderModel(S=[[0]], w0=[1])
        design = design_compensator(leader, SINGLE, 1.0)
        tf = build_transform(design, SINGLE, leader)
        assert np.array_equal(tf.U, np.eye(1))
        assert tf.c[0] == pytest.approx(1.0)
        assert tf.h[0] == pytest.approx(1.0)

    def test_paper_unit_lower_triangular(self, paper_scenario):
        leader, topo = paper_scenario.leader, paper_scenario.topology
        design = design_compensator(leader, topo, 1.0)
        tf = build_transform(design, topo, leader)
        assert np.allclose(np.diag(tf.U), 1.0)
        assert np.array_equal(tf.U, np.tril(tf.U))
        # defining identity holds by substitution
        lam_h = np.diag(design.alphas) @ topo.h_matrix
        lhs = np.kron(tf.U, design.s_shifted)
        rhs = np.kron(np.eye(5), leader.S) + np.kron(lam_h, np.eye(2))
        assert np.linalg.norm(lhs - rhs, "fro") < 1e-12

    def test_paper_coupling_scalars(self, paper_scenario):
        leader, topo = paper_scenario.leader, paper_scenario.topology
        design = design_compensator(leader, topo, 1.0)
        tf = build_transform(design, topo, leader)
        assert np.allclose(tf.c, [1, 3, 3, 7, 15])
        assert np.allclose(tf.h, [1, 2, 2, 8, 8])

    def test_nonscalar_leader_rejected(self):
        # with a nontrivial coupling the defining identity has no solution
        # for a non-scalar leader matrix
        topo = build_topology(2, [(0, 1), (1, 2)])
        leader = LeaderModel(S=[[0, 1], [0, 0]], w0=[1, 0])
        design = design_compensator(leader, topo, 1.0)
        with pytest.raises(NumericalError, match="not representable"):
            build_transform(design, topo, leader)


class TestBuildAugmentedPlant:
    def test_zero_coupling(self, paper_scenario, paper_bundle):
        _, ag = paper_scenario.agents[0]
        zeroed = AgentDynamics(
            A=ag.A, B=ag.B, C=ag.C, D=ag.D, E=np.zeros_like(ag.E), F=np.zeros_like(ag.F)
        )
        reg = solve_regulator(zeroed, paper_scenario.leader)
        design = paper_bundle.design
        tf = paper_bundle.transform
        plant = build_augmented_plant(zeroed, reg, design, tf, 1)
        assert np.allclose(plant.Phi, design.alphas[0] * tf.h[0] * reg.Pi)
        assert np.allclose(plant.Psi, 0)
        assert np.array_equal(plant.C, np.hstack([np.zeros((2, 2)), ag.C]))

    def test_paper_agent1_leader_block(self, paper_bundle):
        plant = paper_bundle.per_agent[0].plant
        assert np.array_equal(plant.A[:2, :2], -np.eye(2))
        assert np.array_equal(plant.A[:2, 2:], np.zeros((2, 3)))
        assert np.array_equal(plant.B[:2], np.zeros((2, 2)))

    def test_scalar_agent_by_hand(self):
        # S=1, r=1: shift = 2; Pi = 2/3, Gamma = 1/3; c = h = 1, alpha = -2
        ag = AgentDynamics(A=[[-1]], B=[[1]], C=[[1]], D=[[1]], E=[[1]], F=[[1]])
        leader = LeaderModel(S=[[1]], w0=[1])
        design = design_compensator(leader, SINGLE, 1.0)
        tf = build_transform(design, SINGLE, leader)
        reg = solve_regulator(ag, leader)
        plant = build_augmented_plant(ag, reg, design, tf, 1)
        # Phi = 1*1 + (-2)*1*(2/3) = -1/3; Psi = -1
        assert np.allclose(plant.A, [[-1, 0], [1 / 3, -1]])
        assert np.allclose(plant.C, [[1, 1]])
        assert np.array_equal(plant.D, ag.D)

    def test_block_structure(self, paper_bundle):
        for ad in paper_bundle.per_agent:
            plant = ad.plant
            assert np.array_equal(plant.A[2:, :2], -plant.Phi)
            assert np.array_equal(plant.A[2:, 2:], ad.agent.A)
            assert np.array_equal(plant.C[:, :2], -plant.Psi)
            assert np.array_equal(plant.D, ad.agent.D)


class TestInitialGains:
    def test_paper_agent1_k2(self, paper_bundle):
        gains = paper_bundle.per_agent[0].initial
        assert np.abs(gains.K2 - paper_tables.K2["agent1"]).max() < 1e-3
        assert gains.K2[0, 0] == pytest.approx(-3.4, abs=1e-3)

    def test_paper_agent4_k2(self, paper_bundle):
        gains = paper_bundle.per_agent[3].initial
        assert np.abs(gains.K2 - paper_tables.K2["agent4"]).max() < 1e-3

    def test_stable_agent_zero_k1(self):
        ag = AgentDynamics(A=[[-1]], B=[[1]], C=[[1]], D=[[1]], E=[[1]], F=[[1]])
        leader = LeaderModel(S=[[1]], w0=[1])
        reg = solve_regulator(ag, leader)
        gains = initial_gains(ag, reg, K1=np.zeros((1, 1)))
        assert np.allclose(gains.K2, -reg.Gamma)
        assert np.array_equal(gains.K3, np.zeros((1, 1)))

    def test_gain_identity(self, paper_bundle):
        for ad in paper_bundle.per_agent:
            g = ad.initial
            res = np.linalg.norm(g.K1 @ ad.reg.Pi + g.K2 + ad.reg.Gamma, "fro")
            assert res < 1e-9 * (1 + np.linalg.norm(ad.reg.Gamma, "fro"))

    def test_augmented_loop_hurwitz(self, paper_bundle):
        for ad in paper_bundle.per_agent:
            assert is_hurwitz(ad.plant.A - ad.plant.B @ ad.initial.Kic)

    def test_rejects_destabilizing_k1(self, paper_scenario):
        _, ag = paper_scenario.agents[0]
        reg = solve_regulator(ag, paper_scenario.leader)
        with pytest.raises(ValidationError):
            initial_gains(ag, reg, K1=-10 * np.ones((2, 3)))
