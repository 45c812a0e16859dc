"""
Config Schemas
JSON schemas for run configurations
"""

ATTACK_KINDS = ['fgsm', 'bim', 'pgd', 'mim']
TRAIN_MODES = ['regular', 'saliency']
FILL_RANGES = ['image', 'remaining']
COMMANDS = ['train', 'attack', 'sweep', 'report', 'selfcheck', 'fetch']

# Seeds are stored as u64 in checkpoints
SEED_MAX = 2 ** 64 - 1


# Training configuration schema
TRAIN_CONFIG_SCHEMA = {
    'type': 'object',
    'required': ['mode', 'epochs', 'batch_size', 'lr', 'lambda', 'mask_fraction', 'seed'],
    'properties': {
        'mode': {'type': 'string', 'enum': TRAIN_MODES},
        'epochs': {'type': 'integer', 'minimum': 1},
        'batch_size': {'type': 'integer', 'minimum': 1},
        'lr': {'type': 'number', 'exclusiveMinimum': 0},
        'lambda': {'type': 'number', 'minimum': 0},
        'mask_fraction': {'type': 'number', 'minimum': 0, 'maximum': 1},
        'seed': {'type': 'integer', 'minimum': 0, 'maximum': SEED_MAX},
        'fill_range': {'type': 'string', 'enum': FILL_RANGES},
        'arch': {'type': 'string', 'minLength': 1}
    },
    'additionalProperties': False
}


# Attack specification schema
ATTACK_SPEC_SCHEMA = {
    'type': 'object',
    'required': ['kind', 'epsilon', 'steps', 'mu', 'seed'],
    'properties': {
        'kind': {'type': 'string', 'enum': ATTACK_KINDS},
        'epsilon': {'type': 'number', 'minimum': 0},
        'alpha': {'type': ['number', 'null']},
        'steps': {'type': 'integer', 'minimum': 1},
        'mu': {'type': 'number', 'minimum': 0},
        'seed': {'type': 'integer', 'minimum': 0, 'maximum': SEED_MAX}
    },
    'if': {
        'properties': {'kind': {'enum': ['bim', 'pgd', 'mim']}}
    },
    'then': {
        'required': ['alpha'],
        'properties': {'alpha': {'type': 'number', 'exclusiveMinimum': 0}}
    },
    'additionalProperties': False
}


# Robustness sweep schema
SWEEP_CONFIG_SCHEMA = {
    'type': 'object',
    'required': ['attacks', 'eps_grid', 'n_samples', 'seed', 'threads'],
    'properties': {
        'attacks': {
            'type': 'array',
            'minItems': 1,
            'uniqueItems': True,
            'items': {'type': 'string', 'enum': ATTACK_KINDS}
        },
        'eps_grid': {
            'type': 'array',
            'minItems': 1,
            'items': {'type': 'number', 'minimum': 0}
        },
        'n_samples': {'type': 'integer', 'minimum': 1},
        'seed': {'type': 'integer', 'minimum': 0, 'maximum': SEED_MAX},
        'threads': {'type': 'integer', 'minimum': 1},
        'bim_steps': {'type': 'integer', 'minimum': 1},
        'pgd_steps': {'type': 'integer', 'minimum': 1},
        'mim_steps': {'type': 'integer', 'minimum': 1},
        'mu': {'type': 'number', 'minimum': 0}
    },
    'additionalProperties': False
}


# Fully resolved command line
RUN_CONFIG_SCHEMA = {
    'type': 'object',
    'required': ['command', 'options'],
    'properties': {
        'command': {'type': 'string', 'enum': COMMANDS},
        'options': {'type': 'object'}
    },
    'additionalProperties': False
}


def get_config_schema(schema_name):
    """
    Get config schema by name

    Args:
        schema_name: Name of schema

    Returns:
        JSON schema or None
    """
    schemas = {
        'train': TRAIN_CONFIG_SCHEMA,
        'attack': ATTACK_SPEC_SCHEMA,
        'sweep': SWEEP_CONFIG_SCHEMA,
        'run': RUN_CONFIG_SCHEMA
    }

    return schemas.get(schema_name)
