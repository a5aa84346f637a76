import math

from rest_framework import serializers

from .approx import RoundingFamily, RoundingScheme, standard_schemes
from .basis import BasisState, FlowNetwork, VariableRef
from .conf import solver_setting
from .exceptions import BasisError, ConfigurationError
from .generator import GenSpec, InterdepMode
from .harness import TrialConfig, TrialGroup
from .instance import relaxation


class FiniteFloatField(serializers.FloatField):
    """Renders NaN and infinities as null so output stays strict JSON."""

    def to_representation(self, value):
        if value is None:
            return None
        value = float(value)
        return value if math.isfinite(value) else None


# ---------------------------------------------------------------------------
# Input validation
# ---------------------------------------------------------------------------


class GenSpecSerializer(serializers.Serializer):
    nodes = serializers.IntegerField(min_value=2)
    arcs_per_node = serializers.IntegerField(min_value=1, default=4)
    source_frac = serializers.FloatField(min_value=0, max_value=1, default=0.20)
    sink_frac = serializers.FloatField(min_value=0, max_value=1, default=0.20)
    cost_range = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2, default=[1, 100])
    cap_range = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=2, max_length=2, default=[100, 500]
    )
    supply_per_256 = serializers.FloatField(min_value=0, default=10000.0)
    interdep_mode = serializers.ChoiceField(choices=[m.value for m in InterdepMode], default="unstructured")
    interdep_frac = serializers.FloatField(min_value=0, max_value=1, default=0.02)
    seed = serializers.IntegerField(default=0)
    ensure_feasible = serializers.BooleanField(default=True)

    def _spec(self, attrs):
        fields = {name: attrs[name] for name in GenSpecSerializer._declared_fields if name in attrs}
        try:
            return GenSpec(**fields)
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc))

    def validate(self, attrs):
        self._spec(attrs)
        return attrs

    def create(self, validated_data):
        return self._spec(validated_data)


class TrialGroupSerializer(GenSpecSerializer):
    trials = serializers.IntegerField(min_value=1, default=30)

    def create(self, validated_data):
        return TrialGroup(self._spec(validated_data), validated_data["trials"])


class SchemeSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=[f.value for f in RoundingFamily])
    epsilon = serializers.FloatField(min_value=0, max_value=0.5, default=0.0)


class BenchConfigSerializer(serializers.Serializer):
    seed = serializers.IntegerField(default=0)
    max_attempts = serializers.IntegerField(min_value=1, required=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    node_limit = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    schemes = SchemeSerializer(many=True, required=False)
    groups = TrialGroupSerializer(many=True, allow_empty=False)

    def create(self, validated_data):
        attempts = validated_data.get("max_attempts") or int(solver_setting("MAX_ATTEMPTS"))
        if "schemes" in validated_data:
            schemes = [
                RoundingScheme(item["family"], item["epsilon"], attempts) for item in validated_data["schemes"]
            ]
        else:
            schemes = standard_schemes(attempts)
        groups = [TrialGroupSerializer().create(item) for item in validated_data["groups"]]
        return TrialConfig(
            groups=groups,
            seed=validated_data["seed"],
            schemes=schemes,
            workers=validated_data.get("workers") or int(solver_setting("BENCH_WORKERS")),
            node_limit=validated_data.get("node_limit"),
        )


class StartBasisSerializer(serializers.Serializer):
    """Starting basis by arc id; slacks are numbered from 1 in interdependence order.

    Needs ``context={"instance": ...}``; ``save()`` returns a BasisState.
    """

    basic_arcs = serializers.ListField(child=serializers.IntegerField())
    basic_slacks = serializers.ListField(child=serializers.IntegerField(min_value=1), default=list)
    upper_arcs = serializers.ListField(child=serializers.IntegerField(), default=list)

    def validate(self, attrs):
        instance = self.context["instance"]
        for name in ("basic_arcs", "upper_arcs"):
            unknown = [a for a in attrs[name] if a not in instance.arc_index]
            if unknown:
                raise serializers.ValidationError({name: f"unknown arc ids {unknown}"})
        bad = [t for t in attrs["basic_slacks"] if t > instance.p]
        if bad:
            raise serializers.ValidationError({"basic_slacks": f"no interdependence numbered {bad}"})
        return attrs

    def create(self, validated_data):
        instance = self.context["instance"]
        network = FlowNetwork.from_instance(relaxation(instance))
        index = instance.arc_index
        basic = [VariableRef.flow(index[a]) for a in validated_data["basic_arcs"]]
        basic += [VariableRef.slack(t - 1) for t in validated_data["basic_slacks"]]
        upper = [VariableRef.flow(index[a]) for a in validated_data["upper_arcs"]]
        try:
            return BasisState.from_sets(network, basic, upper)
        except BasisError as exc:
            raise serializers.ValidationError(str(exc))


# ---------------------------------------------------------------------------
# Output rendering
# ---------------------------------------------------------------------------


class SolveResultSerializer(serializers.Serializer):
    """Pass ``context={"instance": ...}`` to label flows by arc id."""

    status = serializers.CharField(source="status.value")
    objective = FiniteFloatField()
    iterations = serializers.IntegerField()
    phase1_iterations = serializers.IntegerField()
    elapsed = serializers.FloatField()
    flows = serializers.SerializerMethodField()
    slacks = serializers.ListField(child=FiniteFloatField())

    def get_flows(self, obj):
        instance = self.context.get("instance")
        values = [float(v) for v in obj.flows]
        if instance is None:
            return [{"arc": pos + 1, "flow": v} for pos, v in enumerate(values)]
        return [
            {"arc": arc.id, "tail": arc.tail, "head": arc.head, "flow": v} for arc, v in zip(instance.arcs, values)
        ]


class RoundingOutcomeSerializer(serializers.Serializer):
    scheme = serializers.CharField()
    status = serializers.CharField(source="status.value")
    attempts = serializers.IntegerField()
    y = serializers.ListField(child=serializers.IntegerField())
    objective = FiniteFloatField(allow_null=True)
    relative_error = FiniteFloatField(allow_null=True)
    probabilities = serializers.ListField(child=FiniteFloatField())


class TrialSetSummarySerializer(serializers.Serializer):
    group = serializers.CharField()
    nodes = serializers.IntegerField()
    arcs_per_node = serializers.IntegerField()
    density = serializers.FloatField()
    mode = serializers.CharField()
    trials = serializers.IntegerField()
    completed = serializers.IntegerField()
    lp_error_mean = FiniteFloatField()
    lp_error_std = FiniteFloatField()
    schemes = serializers.DictField(child=serializers.DictField(child=FiniteFloatField()))
    sandwich_violations = serializers.IntegerField()
