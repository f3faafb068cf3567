# Tests for riemannian-graph-ode
