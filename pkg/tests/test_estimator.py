import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from enkshape.enkf import MatchConfig
from enkshape.estimator import LandmarkMatcher
from enkshape.synthetic import SynthSpec, circle_template, make_target


@pytest.fixture(scope="module")
def easy_problem():
    template, target, _ = make_target(
        SynthSpec(n_landmarks=8, ensemble_size=2, seed=5, target_momentum_std=0.6),
        MatchConfig(),
    )
    return template, target


class TestSklearnProtocol:
    def test_get_params_roundtrip(self):
        matcher = LandmarkMatcher(ensemble_size=12, xi=0.5, random_state=3)
        params = matcher.get_params()
        assert params["ensemble_size"] == 12
        assert params["xi"] == 0.5
        rebuilt = LandmarkMatcher(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        matcher = LandmarkMatcher().set_params(tau=2.0, iterations=7)
        assert matcher.tau == 2.0 and matcher.iterations == 7

    def test_clone_preserves_params(self):
        matcher = LandmarkMatcher(ensemble_size=9, threads=2, random_state=1)
        assert clone(matcher).get_params() == matcher.get_params()

    def test_unfitted_transform_raises(self):
        with pytest.raises(NotFittedError, match="not fitted"):
            LandmarkMatcher().transform(np.zeros((3, 2)))


class TestFit:
    def test_fit_reduces_misfit(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=16, random_state=0).fit(template, target)
        assert matcher.misfits_[-1] < 0.05 * matcher.misfits_[0]
        assert matcher.momentum_.shape == template.shape
        assert matcher.ensemble_.shape == (16, *template.shape)
        assert matcher.n_iter_ <= 50

    def test_reproducible_with_seed(self, easy_problem):
        template, target = easy_problem
        first = LandmarkMatcher(ensemble_size=8, iterations=5, random_state=11)
        second = LandmarkMatcher(ensemble_size=8, iterations=5, random_state=11)
        np.testing.assert_array_equal(
            first.fit(template, target).momentum_,
            second.fit(template, target).momentum_,
        )

    def test_generator_random_state(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=6, iterations=3,
                                  random_state=np.random.default_rng(4))
        matcher.fit(template, target)
        assert isinstance(matcher.seed_, int)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            LandmarkMatcher().fit(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_fit_returns_self(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=6, iterations=2, random_state=0)
        assert matcher.fit(template, target) is matcher


class TestTransform:
    def test_template_lands_near_target(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=16, random_state=0).fit(template, target)
        warped = matcher.transform(template)
        assert np.sum((target - warped) ** 2) < 0.1 * matcher.misfits_[0]

    def test_template_maps_to_fitted_path_endpoint(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=8, iterations=5, random_state=2)
        matcher.fit(template, target)
        np.testing.assert_allclose(matcher.transform(template),
                                   matcher.path_.endpoint, atol=1e-12)

    def test_accepts_other_point_sets(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=8, iterations=5, random_state=2)
        matcher.fit(template, target)
        dense = 0.9 * circle_template(64)
        warped = matcher.transform(dense)
        assert warped.shape == (64, 2)
        assert np.all(np.isfinite(warped))

    def test_score_is_negative_squared_misfit(self, easy_problem):
        template, target = easy_problem
        matcher = LandmarkMatcher(ensemble_size=16, random_state=0).fit(template, target)
        score = matcher.score(template, target)
        assert score == pytest.approx(
            -float(np.sum((target - matcher.transform(template)) ** 2))
        )
        assert score <= 0.0
