"""
Result Schemas
JSON schemas for rows read back from metrics and curve files
"""

from schema.config_schemas import ATTACK_KINDS, TRAIN_MODES


# Per-epoch training metrics row
METRICS_ROW_SCHEMA = {
    'type': 'object',
    'required': ['epoch', 'mode', 'loss', 'train_acc'],
    'properties': {
        'epoch': {'type': 'integer', 'minimum': 1},
        'mode': {'type': 'string', 'enum': TRAIN_MODES},
        'loss': {'type': 'number', 'minimum': 0},
        'train_acc': {'type': 'number', 'minimum': 0, 'maximum': 1}
    },
    'additionalProperties': False
}


# Robustness curve point row
CURVE_ROW_SCHEMA = {
    'type': 'object',
    'required': ['model', 'attack', 'epsilon', 'n_samples', 'n_correct', 'accuracy'],
    'properties': {
        'model': {'type': 'string', 'minLength': 1},
        'attack': {'type': 'string', 'enum': ATTACK_KINDS},
        'epsilon': {'type': 'number', 'minimum': 0},
        'n_samples': {'type': 'integer', 'minimum': 1},
        'n_correct': {'type': 'integer', 'minimum': 0},
        'accuracy': {'type': 'number', 'minimum': 0, 'maximum': 1}
    },
    'additionalProperties': False
}


def get_result_schema(schema_name):
    """
    Get result schema by name

    Args:
        schema_name: Name of schema

    Returns:
        JSON schema or None
    """
    schemas = {
        'metrics_row': METRICS_ROW_SCHEMA,
        'curve_row': CURVE_ROW_SCHEMA
    }

    return schemas.get(schema_name)
