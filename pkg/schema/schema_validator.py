"""
Schema Validator
Validates configurations and result rows against JSON schemas
"""

import logging
from jsonschema import Draft7Validator

from common.errors import ConfigError

logger = logging.getLogger(__name__)


class SchemaValidator:
    """
    JSON Schema validator
    """

    def __init__(self):
        self.validation_errors = []
        logger.debug("Schema Validator initialized")

    def validate(self, data, schema):
        """
        Validate data against schema

        Args:
            data: Data to validate
            schema: JSON schema

        Returns:
            Validation result with every violation, not just the first
        """
        result = {
            'valid': True,
            'errors': []
        }

        for error in sorted(Draft7Validator(schema).iter_errors(data), key=lambda e: [str(p) for p in e.path]):
            result['valid'] = False
            result['errors'].append({
                'message': error.message,
                'path': list(error.path),
                'schema_path': list(error.schema_path)
            })

        if result['valid']:
            logger.debug("Schema validation passed")
        else:
            self.validation_errors.append(result)
            logger.warning(f"Schema validation failed: {[e['message'] for e in result['errors']]}")

        return result

    def require(self, data, schema, what):
        """
        Validate and raise on failure

        Args:
            data: Data to validate
            schema: JSON schema
            what: Name used in the error message

        Raises:
            ConfigError listing every violated path
        """
        result = self.validate(data, schema)
        if not result['valid']:
            details = "; ".join(
                f"{'/'.join(str(p) for p in e['path']) or '<root>'}: {e['message']}"
                for e in result['errors']
            )
            raise ConfigError(f"invalid {what}: {details}", result['errors'])
        return data

    def get_validation_errors(self):
        """Get all validation errors"""
        return self.validation_errors

    def clear_errors(self):
        """Clear validation errors"""
        self.validation_errors.clear()


validator = SchemaValidator()
